// Wire types mirroring the gateway's JSON documents. The console renders
// these verbatim; it never recomputes a confidence client-side.

export interface TripleDoc {
  id: string;
  subject: string;
  predicate: string;
  object: string;
  provenance: string;
  status: string;
  'source-chunk': string | null;
}

export interface ReviewItemDoc {
  item_id: string;
  relation_id: string;
  proposed_by: string;
  state: 'pending' | 'approved' | 'rejected';
  reviewer: string | null;
  verdict_note: string | null;
  revision: number;
  triple: TripleDoc;
  source_chunk_text?: string | null;
}

export interface ScoredDoc {
  diagnosis_id: string;
  confidence: number;
}

export interface AgentResultDoc {
  agent_id: string;
  specialty: string;
  results: ScoredDoc[];
}

export interface DecisionDoc {
  referral: boolean;
  reason: string;
  target_specialties: string[];
}

export interface OutcomeDoc {
  kind: string;
  final: ScoredDoc;
  decision: DecisionDoc;
  flags: string[];
  per_agent: AgentResultDoc[];
  hops: { from: string; to: string }[];
  trace: string[];
}

export interface TranscriptEntryDoc {
  speaker: 'patient' | 'gp' | 'consultant' | 'system';
  text: string;
  ts: number;
}

export interface SessionDoc {
  session_id: string;
  state: string;
  symptom_ids: string[];
  asked_symptoms: string[];
  pending_question: string | null;
  questions_left: number;
  gp_ranking: ScoredDoc[];
  transcript: TranscriptEntryDoc[];
  outcome: OutcomeDoc | null;
}

export interface GraphEntityDoc {
  id: string;
  label: string;
  category: string;
  specialty: string;
  aliases: string[];
}

export interface GraphExportDoc {
  version: number;
  entities: GraphEntityDoc[];
  relations: TripleDoc[];
}

export interface HealthDoc {
  status: string;
  graph_version: number;
}
