import { ApiClient } from './api'
import { hostAllowed } from './allowlist'
import { AdjudicatePanel, AnnotateSession } from './controller'
import type { ProgressInfo } from './types'

const api = new ApiClient('')

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

let session: AnnotateSession | null = null
let panel: AdjudicatePanel | null = null
let chosenLabel: 'yes' | 'no' | null = null

function show(screen: 'login' | 'annotate' | 'done' | 'adjudicate'): void {
  for (const name of ['login', 'annotate', 'done', 'adjudicate']) {
    el(`screen-${name}`).hidden = name !== screen
  }
}

function renderProgress(info: ProgressInfo): void {
  el('progress-pending').textContent = String(info.pending)
  el('progress-conflicted').textContent = String(info.conflicted)
  el('progress-resolved').textContent = String(info.resolved)
  el('progress-agreement').textContent =
    info.agreement_rate === null ? 'n/a' : info.agreement_rate.toFixed(3)
}

async function refreshProgress(): Promise<void> {
  try {
    renderProgress(await api.progress())
  } catch {
    // progress is advisory; keep the last values on transient failures
  }
}

function updateSubmitGate(): void {
  const url = el<HTMLInputElement>('source-url').value.trim()
  const ok = chosenLabel !== null && hostAllowed(url)
  el<HTMLButtonElement>('submit-button').disabled = !ok
  el('allowlist-hint').textContent =
    url && !hostAllowed(url) ? 'source link must come from a verified host' : ''
}

function selectLabel(label: 'yes' | 'no'): void {
  chosenLabel = label
  el('label-yes').classList.toggle('selected', label === 'yes')
  el('label-no').classList.toggle('selected', label === 'no')
  updateSubmitGate()
}

function renderTask(): void {
  if (!session) return
  if (session.phase === 'done') {
    show('done')
    void refreshProgress()
    return
  }
  if (session.phase === 'network-error') {
    el('error-box').textContent = `network problem: ${session.lastError} (judgment not lost)`
    el<HTMLButtonElement>('retry-button').hidden = false
    return
  }
  el<HTMLButtonElement>('retry-button').hidden = true
  const task = session.current
  if (!task) return
  el('question-text').textContent = task.question_text
  el('triple-display').textContent =
    `(${task.triple.subject}, ${task.triple.relation}, ${task.triple.object})`
  el('error-box').textContent = session.lastError
  chosenLabel = null
  el('label-yes').classList.remove('selected')
  el('label-no').classList.remove('selected')
  el<HTMLInputElement>('source-url').value = ''
  updateSubmitGate()
}

async function submitCurrent(): Promise<void> {
  if (!session || chosenLabel === null) return
  const url = el<HTMLInputElement>('source-url').value.trim()
  const outcome = await session.submit(chosenLabel, url)
  if (!outcome.accepted) {
    // task retained; reason shown inline
    el('error-box').textContent = outcome.reason ?? 'submission rejected'
  }
  renderTask()
  void refreshProgress()
}

async function startAnnotating(): Promise<void> {
  const annotator = el<HTMLInputElement>('annotator-id').value.trim()
  if (!annotator) return
  session = new AnnotateSession(api, annotator)
  show('annotate')
  await session.loadNext()
  renderTask()
  void refreshProgress()
}

async function openAdjudication(): Promise<void> {
  const adjudicator = el<HTMLInputElement>('annotator-id').value.trim()
  if (!adjudicator) return
  panel = new AdjudicatePanel(api, adjudicator)
  show('adjudicate')
  await panel.refresh()
  renderConflicts()
}

function renderConflicts(): void {
  if (!panel) return
  const list = el('conflict-list')
  list.innerHTML = ''
  if (panel.conflicts.length === 0) {
    list.innerHTML = '<li class="empty">no open conflicts</li>'
    return
  }
  for (const conflict of panel.conflicts) {
    const item = document.createElement('li')
    const judgments = conflict.judgments
      .map(
        (j) =>
          `<span class="judgment">${j.label} — <a href="${j.source_url}" target="_blank" rel="noreferrer">source</a></span>`,
      )
      .join(' vs ')
    item.innerHTML = `
      <p class="question">${conflict.question_text}</p>
      <p>${judgments}</p>
      <input type="url" placeholder="adjudication source link" class="adj-source">
      <button data-label="yes">final: yes</button>
      <button data-label="no">final: no</button>
      <span class="adj-error"></span>`
    for (const button of item.querySelectorAll('button')) {
      button.addEventListener('click', async () => {
        const url = item.querySelector<HTMLInputElement>('.adj-source')!.value.trim()
        const label = button.dataset.label as 'yes' | 'no'
        if (!hostAllowed(url)) {
          item.querySelector('.adj-error')!.textContent = 'verified source required'
          return
        }
        const outcome = await panel!.resolve(conflict.task_id, label, url)
        if (!outcome.accepted) {
          item.querySelector('.adj-error')!.textContent = outcome.reason ?? 'rejected'
        }
        renderConflicts()
        void refreshProgress()
      })
    }
    list.appendChild(item)
  }
}

export function wireUp(): void {
  el('start-button').addEventListener('click', () => void startAnnotating())
  el('adjudicate-button').addEventListener('click', () => void openAdjudication())
  el('label-yes').addEventListener('click', () => selectLabel('yes'))
  el('label-no').addEventListener('click', () => selectLabel('no'))
  el('source-url').addEventListener('input', updateSubmitGate)
  el('submit-button').addEventListener('click', () => void submitCurrent())
  el('retry-button').addEventListener('click', async () => {
    await session?.retry()
    renderTask()
  })
  document.addEventListener('keydown', (event) => {
    if (el('screen-annotate').hidden) return
    const target = event.target as HTMLElement
    if (target.tagName === 'INPUT' && event.key !== 'Enter') return
    if (event.key === 'y') selectLabel('yes')
    else if (event.key === 'n') selectLabel('no')
    else if (event.key === 'Enter' && !el<HTMLButtonElement>('submit-button').disabled) {
      void submitCurrent()
    }
  })
  void refreshProgress()
}

if (typeof document !== 'undefined' && document.getElementById('screen-login')) {
  wireUp()
}
