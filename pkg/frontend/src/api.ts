import type { ConflictView, JudgmentResponse, ProgressInfo, TaskPayload } from './types'

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(detail)
  }
}

/** Thin typed client over the five campaign endpoints. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.baseUrl + path, init)
    if (response.status === 422 || response.status === 409) {
      const body = await response.json().catch(() => ({ detail: response.statusText }))
      throw new ApiError(response.status, body.detail ?? response.statusText)
    }
    if (!response.ok && response.status !== 204) {
      throw new ApiError(response.status, `unexpected response ${response.status}`)
    }
    return response
  }

  /** Next task for an annotator, or null when they are done. */
  async nextTask(annotator: string): Promise<TaskPayload | null> {
    const response = await this.request(
      `/api/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    )
    if (response.status === 204) return null
    return (await response.json()) as TaskPayload
  }

  async submitJudgment(
    taskId: string,
    annotator: string,
    label: 'yes' | 'no',
    sourceUrl: string,
  ): Promise<JudgmentResponse> {
    const response = await this.request('/api/judgments', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({
        task_id: taskId,
        annotator,
        label,
        source_url: sourceUrl,
      }),
    })
    return (await response.json()) as JudgmentResponse
  }

  async conflicts(): Promise<ConflictView[]> {
    const response = await this.request('/api/conflicts')
    return (await response.json()) as ConflictView[]
  }

  async progress(): Promise<ProgressInfo> {
    const response = await this.request('/api/progress')
    return (await response.json()) as ProgressInfo
  }

  async exportQrels(): Promise<string> {
    const response = await this.request('/api/export/qrels')
    return await response.text()
  }
}
