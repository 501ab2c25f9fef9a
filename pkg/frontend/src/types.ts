export interface TripleView {
  subject: string
  relation: string
  object: string
}

export interface TaskPayload {
  task_id: string
  qid: string
  question_text: string
  triple: TripleView
  entity_label: string
}

export interface JudgmentResponse {
  task_id: string
  state: 'pending' | 'conflicted' | 'resolved'
}

export interface ConflictJudgment {
  annotator: string
  label: 'yes' | 'no'
  source_url: string
}

export interface ConflictView {
  task_id: string
  question_text: string
  judgments: ConflictJudgment[]
}

export interface ProgressInfo {
  pending: number
  conflicted: number
  resolved: number
  agreement_rate: number | null
}
