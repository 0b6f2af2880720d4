// Wire types. These mirror the server's JSON exactly; the console never
// invents fields of its own.

export type Scalar = string | number | boolean | null;

export interface EventRecord {
  id: string;
  base: string;
  type: string;
  value: Scalar;
  actor: string;
  model: string;
  cause: string | string[];
  date: string;
  seq: number;
}

export interface ActorRow {
  id: string;
  name: string;
  roles: string[];
}

export interface Restriction {
  type: string;
  value: string;
}

export interface PropertySummary {
  property: string;
  type: string;
  depth: number;
  computed: boolean;
  restrictions: Restriction[];
}

export interface ModelSummary {
  name: string;
  concept: string;
  properties: PropertySummary[];
}

export interface IndividualSummary {
  id: string;
  name: string;
  model: string;
  seq: number;
  actor: string;
  properties: Record<string, Scalar>;
}

export interface IndividualDetail extends IndividualSummary {
  history: EventRecord[];
}

export interface EnabledField {
  property: string;
  type: string;
  enabled: boolean;
  reason: string;
  value: Scalar;
  computed: boolean;
}

export interface EnabledReport {
  individual: string;
  seq: number;
  fields: EnabledField[];
}

export interface CommitPayload {
  trigger: EventRecord;
  cascade: EventRecord[];
  head_seq: number;
}

export interface EventsPage {
  events: EventRecord[];
  head_seq: number;
  more: boolean;
}

export interface ServiceInfo {
  service: string;
  version: string;
  head_seq: number;
  models: string[];
}

// 401/403/409/422 bodies all carry {detail: {code, message, seq?}}
export interface RefusalDetail {
  code: string;
  message: string;
  seq?: number;
}

export function causeList(record: EventRecord): string[] {
  return Array.isArray(record.cause) ? record.cause : [record.cause];
}
