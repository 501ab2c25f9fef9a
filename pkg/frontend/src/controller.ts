import { ApiClient, ApiError } from './api'
import type { ConflictView, TaskPayload } from './types'

export type SessionPhase = 'idle' | 'judging' | 'done' | 'network-error'

export interface SubmitOutcome {
  accepted: boolean
  state?: string
  reason?: string
}

/**
 * The fetch-next / display / submit loop of one annotator.
 *
 * A server rejection (422) keeps the current task on screen and surfaces
 * the reason; a network failure parks the session in 'network-error'
 * without losing the task, so a retry can resume exactly where it stopped.
 */
export class AnnotateSession {
  phase: SessionPhase = 'idle'
  current: TaskPayload | null = null
  lastError = ''
  submitted = 0

  constructor(
    private readonly api: ApiClient,
    readonly annotator: string,
  ) {}

  async loadNext(): Promise<void> {
    try {
      const task = await this.api.nextTask(this.annotator)
      if (task === null) {
        this.phase = 'done'
        this.current = null
      } else {
        this.phase = 'judging'
        this.current = task
      }
      this.lastError = ''
    } catch (error) {
      if (error instanceof ApiError) {
        this.lastError = error.detail
        this.phase = 'idle'
      } else {
        this.lastError = String(error)
        this.phase = 'network-error'
      }
    }
  }

  async submit(label: 'yes' | 'no', sourceUrl: string): Promise<SubmitOutcome> {
    if (!this.current) return { accepted: false, reason: 'no task loaded' }
    try {
      const response = await this.api.submitJudgment(
        this.current.task_id,
        this.annotator,
        label,
        sourceUrl,
      )
      this.submitted += 1
      this.lastError = ''
      await this.loadNext()
      return { accepted: true, state: response.state }
    } catch (error) {
      if (error instanceof ApiError) {
        // rejection: task stays on screen with the server's reason
        this.lastError = error.detail
        return { accepted: false, reason: error.detail }
      }
      this.phase = 'network-error'
      this.lastError = String(error)
      return { accepted: false, reason: this.lastError }
    }
  }

  /** Retry after a network failure without losing the current task. */
  async retry(): Promise<void> {
    if (this.current === null) {
      await this.loadNext()
    } else {
      this.phase = 'judging'
      this.lastError = ''
    }
  }
}

/** Conflict list for the adjudicator view. */
export class AdjudicatePanel {
  conflicts: ConflictView[] = []
  lastError = ''

  constructor(
    private readonly api: ApiClient,
    readonly adjudicator: string,
  ) {}

  async refresh(): Promise<void> {
    try {
      this.conflicts = await this.api.conflicts()
      this.lastError = ''
    } catch (error) {
      this.lastError = error instanceof ApiError ? error.detail : String(error)
    }
  }

  async resolve(taskId: string, label: 'yes' | 'no', sourceUrl: string): Promise<SubmitOutcome> {
    try {
      const response = await this.api.submitJudgment(taskId, this.adjudicator, label, sourceUrl)
      await this.refresh()
      return { accepted: true, state: response.state }
    } catch (error) {
      if (error instanceof ApiError) {
        // e.g. resolved concurrently by someone else: surface and refresh
        this.lastError = error.detail
        await this.refresh()
        return { accepted: false, reason: error.detail }
      }
      this.lastError = String(error)
      return { accepted: false, reason: this.lastError }
    }
  }
}
