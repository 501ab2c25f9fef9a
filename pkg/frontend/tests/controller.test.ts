import { describe, expect, it } from 'vitest'
import { ApiClient } from '../src/api'
import { AdjudicatePanel, AnnotateSession } from '../src/controller'
import type { TaskPayload } from '../src/types'

function task(id: string): TaskPayload {
  return {
    task_id: id,
    qid: 'q0000001',
    question_text: `is fact ${id} true?`,
    triple: { subject: 's', relation: 'p', object: 'o' },
    entity_label: 'o',
  }
}

/** Scripted server: a queue of tasks plus a per-call rejection plan. */
function scriptedClient(tasks: TaskPayload[], options: { rejectFirstSubmit?: boolean } = {}) {
  let submitCalls = 0
  const submissions: Array<{ task_id: string; label: string }> = []
  const fetchImpl = async (input: string, init?: RequestInit): Promise<Response> => {
    if (input.includes('/api/tasks/next')) {
      const next = tasks.shift()
      if (!next) return new Response(null, { status: 204 })
      return Response.json(next)
    }
    if (input.includes('/api/judgments')) {
      submitCalls += 1
      if (options.rejectFirstSubmit && submitCalls === 1) {
        return Response.json(
          { detail: 'source host is not in the verified-source allowlist' },
          { status: 422 },
        )
      }
      const body = JSON.parse(String(init?.body))
      submissions.push({ task_id: body.task_id, label: body.label })
      return Response.json({ task_id: body.task_id, state: 'pending' })
    }
    if (input.includes('/api/conflicts')) {
      return Response.json([])
    }
    throw new Error(`unexpected request ${input}`)
  }
  return { api: new ApiClient('http://test', fetchImpl), submissions }
}

describe('AnnotateSession', () => {
  it('walks the fetch-display-submit cycle to completion', async () => {
    const { api, submissions } = scriptedClient([task('t1'), task('t2')])
    const session = new AnnotateSession(api, 'ann1')
    await session.loadNext()
    expect(session.phase).toBe('judging')
    expect(session.current?.task_id).toBe('t1')

    expect((await session.submit('yes', 'https://en.wikipedia.org/wiki/X')).accepted).toBe(true)
    expect(session.current?.task_id).toBe('t2')
    expect((await session.submit('no', 'https://en.wikipedia.org/wiki/Y')).accepted).toBe(true)
    expect(session.phase).toBe('done')
    expect(submissions.map((s) => s.label)).toEqual(['yes', 'no'])
  })

  it('keeps the task and surfaces the reason on a 422', async () => {
    const { api } = scriptedClient([task('t1')], { rejectFirstSubmit: true })
    const session = new AnnotateSession(api, 'ann1')
    await session.loadNext()
    const outcome = await session.submit('yes', 'https://bad.example/x')
    expect(outcome.accepted).toBe(false)
    expect(outcome.reason).toContain('allowlist')
    expect(session.current?.task_id).toBe('t1') // not lost
    expect(session.phase).toBe('judging')
    // retrying with a good source succeeds
    expect((await session.submit('yes', 'https://en.wikipedia.org/wiki/X')).accepted).toBe(true)
  })

  it('parks on network failure without losing the task, then retries', async () => {
    let failNext = false
    const tasks = [task('t1')]
    const fetchImpl = async (input: string): Promise<Response> => {
      if (failNext) throw new TypeError('fetch failed')
      if (input.includes('/api/tasks/next')) {
        const next = tasks.shift()
        return next ? Response.json(next) : new Response(null, { status: 204 })
      }
      throw new TypeError('fetch failed')
    }
    const session = new AnnotateSession(new ApiClient('http://test', fetchImpl), 'ann1')
    await session.loadNext()
    failNext = true
    const outcome = await session.submit('yes', 'https://en.wikipedia.org/wiki/X')
    expect(outcome.accepted).toBe(false)
    expect(session.phase).toBe('network-error')
    expect(session.current?.task_id).toBe('t1')
    failNext = false
    await session.retry()
    expect(session.phase).toBe('judging')
    expect(session.current?.task_id).toBe('t1')
  })

  it('shows completion on an empty queue', async () => {
    const { api } = scriptedClient([])
    const session = new AnnotateSession(api, 'ann1')
    await session.loadNext()
    expect(session.phase).toBe('done')
    expect(session.current).toBeNull()
  })
})

describe('AdjudicatePanel', () => {
  it('lists conflicts and clears them after resolution', async () => {
    let resolved = false
    const conflict = {
      task_id: 't9',
      question_text: 'is this disputed fact true?',
      judgments: [
        { annotator: 'a', label: 'yes', source_url: 'https://en.wikipedia.org/wiki/A' },
        { annotator: 'b', label: 'no', source_url: 'https://en.wikipedia.org/wiki/B' },
      ],
    }
    const fetchImpl = async (input: string): Promise<Response> => {
      if (input.includes('/api/conflicts')) {
        return Response.json(resolved ? [] : [conflict])
      }
      if (input.includes('/api/judgments')) {
        resolved = true
        return Response.json({ task_id: 't9', state: 'resolved' })
      }
      throw new Error(`unexpected ${input}`)
    }
    const panel = new AdjudicatePanel(new ApiClient('http://test', fetchImpl), 'c')
    await panel.refresh()
    expect(panel.conflicts).toHaveLength(1)
    expect(panel.conflicts[0].judgments.map((j) => j.label)).toEqual(['yes', 'no'])
    const outcome = await panel.resolve('t9', 'no', 'https://en.wikipedia.org/wiki/C')
    expect(outcome.accepted).toBe(true)
    expect(panel.conflicts).toHaveLength(0)
  })

  it('surfaces a concurrent-resolution race and refreshes', async () => {
    const fetchImpl = async (input: string): Promise<Response> => {
      if (input.includes('/api/conflicts')) return Response.json([])
      if (input.includes('/api/judgments')) {
        return Response.json({ detail: 'task t9 is already resolved' }, { status: 422 })
      }
      throw new Error(`unexpected ${input}`)
    }
    const panel = new AdjudicatePanel(new ApiClient('http://test', fetchImpl), 'c')
    const outcome = await panel.resolve('t9', 'yes', 'https://en.wikipedia.org/wiki/C')
    expect(outcome.accepted).toBe(false)
    expect(outcome.reason).toContain('already resolved')
  })
})
