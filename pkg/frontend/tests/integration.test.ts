/**
 * End-to-end campaign: a scripted browser session (the real UI controllers
 * driving the real annotation server over HTTP) judges a 20-task campaign
 * with one forced conflict, an adjudication, and one allowlist rejection.
 * The qrels exported by the server must be byte-identical to the qrels
 * produced by replaying the same judgment sequence through the batch TSV
 * import path of the CLI.
 */

import { spawn, execFile } from 'node:child_process'
import { mkdtempSync, readFileSync, writeFileSync, mkdirSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join, dirname } from 'node:path'
import { fileURLToPath } from 'node:url'
import { promisify } from 'node:util'
import { afterAll, beforeAll, describe, expect, it } from 'vitest'

import { ApiClient } from '../src/api'
import { AdjudicatePanel, AnnotateSession } from '../src/controller'

const execFileAsync = promisify(execFile)
const FRONTEND_DIR = dirname(dirname(fileURLToPath(import.meta.url)))
const REPO_DIR = dirname(FRONTEND_DIR)
const WIKI = 'https://en.wikipedia.org/wiki/Some_Page'
const PORT = 21300 + (process.pid % 1500)
const BASE = `http://127.0.0.1:${PORT}`

let work: string
let serverProc: ReturnType<typeof spawn> | null = null
let splitsArgs: string[] = []

async function cli(args: string[]): Promise<{ stdout: string; stderr: string }> {
  return execFileAsync('python3', ['-m', 'kgc_eval.cli', ...args], { cwd: REPO_DIR })
}

function writeFixture(): void {
  work = mkdtempSync(join(tmpdir(), 'kgc-ui-'))
  // one test triple -> 2 questions (q0000001 head, q0000002 tail)
  writeFileSync(join(work, 'train.txt'), 's\tp\tt0\n')
  writeFileSync(join(work, 'valid.txt'), 's\tp\tt1\n')
  writeFileSync(join(work, 'test.txt'), 's\tp\to\n')
  splitsArgs = [
    '--train', join(work, 'train.txt'),
    '--valid', join(work, 'valid.txt'),
    '--test', join(work, 'test.txt'),
  ]
  // two identical runs: 10 head candidates f00..f09, 10 tail candidates
  // e00..e09, answers at rank 11 so they stay out of the depth-10 pool
  for (const tag of ['sys1', 'sys2']) {
    const lines: string[] = []
    for (const [qid, prefix, answer] of [
      ['q0000001', 'f', 's'],
      ['q0000002', 'e', 'o'],
    ] as const) {
      for (let i = 0; i < 10; i++) {
        lines.push(`${qid} Q0 ${prefix}0${i} ${i + 1} ${20 - i} ${tag}`)
      }
      lines.push(`${qid} Q0 ${answer} 11 ${20 - 10} ${tag}`)
    }
    writeFileSync(join(work, `run_${tag}.txt`), lines.join('\n') + '\n')
  }
}

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      const response = await fetch(`${BASE}/api/progress`)
      if (response.ok) return
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100))
  }
  throw new Error('annotation server did not come up')
}

beforeAll(async () => {
  writeFixture()
  await cli([
    'pool', 'build', ...splitsArgs,
    '--run', `sys1=${join(work, 'run_sys1.txt')}`,
    '--run', `sys2=${join(work, 'run_sys2.txt')}`,
    '--depth', '10',
    '--out-pool', join(work, 'pool.tsv'),
  ])
  serverProc = spawn(
    'python3',
    [
      '-m', 'kgc_eval.cli', 'annotate', 'serve',
      '--campaign', join(work, 'campaignA'),
      '--pool', join(work, 'pool.tsv'),
      ...splitsArgs,
      '--roster', 'u1,u2,u3',
      '--allowlist', 'wikipedia.org',
      '--port', String(PORT),
      '--ui-dir', join(FRONTEND_DIR, 'dist'),
    ],
    { cwd: REPO_DIR, stdio: ['ignore', 'pipe', 'pipe'] },
  )
  await waitForServer()
}, 60_000)

afterAll(() => {
  serverProc?.kill()
})

describe('20-task campaign through the UI controllers', () => {
  const api = new ApiClient(BASE)

  it('serves the static UI bundle from the same process', async () => {
    const response = await fetch(`${BASE}/`)
    expect(response.status).toBe(200)
    expect(await response.text()).toContain('Triple question annotation')
  }, 30_000)

  it('runs the full double-annotation campaign and matches the batch path', async () => {
    const progress0 = await api.progress()
    expect(progress0.pending).toBe(20)

    // --- annotator u1: allowlist rejection surfaced, no judgment lost ---
    const u1 = new AnnotateSession(api, 'u1')
    await u1.loadNext()
    expect(u1.phase).toBe('judging')
    const firstTask = u1.current!.task_id
    const rejected = await u1.submit('yes', 'https://untrusted.example/source')
    expect(rejected.accepted).toBe(false)
    expect(rejected.reason).toContain('allowlist')
    expect(u1.current!.task_id).toBe(firstTask) // task retained
    // u1 answers yes on everything
    let guard = 0
    while (u1.phase === 'judging' && guard++ < 50) {
      const outcome = await u1.submit('yes', WIKI)
      expect(outcome.accepted).toBe(true)
    }
    expect(u1.phase).toBe('done')
    expect(u1.submitted).toBe(20)

    // --- annotator u2: disagrees on the first task only ---
    const u2 = new AnnotateSession(api, 'u2')
    await u2.loadNext()
    let first = true
    guard = 0
    while (u2.phase === 'judging' && guard++ < 50) {
      const outcome = await u2.submit(first ? 'no' : 'yes', WIKI)
      expect(outcome.accepted).toBe(true)
      first = false
    }
    expect(u2.phase).toBe('done')

    const midway = await api.progress()
    expect(midway.conflicted).toBe(1)
    expect(midway.resolved).toBe(19)

    // --- adjudicator u3 resolves the conflict ---
    const panel = new AdjudicatePanel(api, 'u3')
    await panel.refresh()
    expect(panel.conflicts).toHaveLength(1)
    expect(panel.conflicts[0].judgments.map((j) => j.label).sort()).toEqual(['no', 'yes'])
    expect(panel.conflicts[0].judgments.every((j) => j.source_url === WIKI)).toBe(true)
    const resolution = await panel.resolve(panel.conflicts[0].task_id, 'no', WIKI)
    expect(resolution.accepted).toBe(true)
    expect(panel.conflicts).toHaveLength(0)

    const done = await api.progress()
    expect(done).toEqual({
      pending: 0,
      conflicted: 0,
      resolved: 20,
      agreement_rate: 0.95,
    })

    // --- the server's qrels export ---
    const uiQrels = await api.exportQrels()
    expect(uiQrels.trim().split('\n')).toHaveLength(22) // 20 pooled + 2 originals

    // --- same judgment sequence through the batch TSV import path ---
    const outA = join(work, 'exportA')
    mkdirSync(outA, { recursive: true })
    await cli([
      'annotate', 'export',
      '--campaign', join(work, 'campaignA'),
      '--pool', join(work, 'pool.tsv'),
      ...splitsArgs,
      '--out', outA,
    ])
    const batch = join(outA, 'batch.tsv')
    expect(readFileSync(batch, 'utf-8').trim().split('\n')).toHaveLength(41)

    await cli([
      'annotate', 'import',
      '--campaign', join(work, 'campaignB'),
      '--pool', join(work, 'pool.tsv'),
      ...splitsArgs,
      '--roster', 'u1,u2,u3',
      '--allowlist', 'wikipedia.org',
      '--batch', batch,
    ])
    const outB = join(work, 'exportB')
    await cli([
      'annotate', 'export',
      '--campaign', join(work, 'campaignB'),
      '--pool', join(work, 'pool.tsv'),
      ...splitsArgs,
      '--out', outB,
    ])
    const batchQrels = readFileSync(join(outB, 'qrels.txt'), 'utf-8')
    expect(batchQrels).toBe(uiQrels) // byte-identical exports
    expect(readFileSync(join(outA, 'qrels.txt'), 'utf-8')).toBe(uiQrels)

    // agreement via the CLI agrees with the API
    const { stdout } = await cli([
      'annotate', 'agreement',
      '--campaign', join(work, 'campaignA'),
    ])
    expect(stdout).toContain('agreement-rate: 0.950000')
  }, 120_000)
})
