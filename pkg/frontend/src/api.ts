import type {
  ActorRow,
  CommitPayload,
  EnabledReport,
  EventsPage,
  IndividualDetail,
  IndividualSummary,
  ModelSummary,
  RefusalDetail,
  ServiceInfo,
} from "./types.js";

// Server refusals keep their machine-readable code so the UI can show
// exactly why a submission bounced (ConditionFalse, PermissionDenied, ...).
export class ApiRefusal extends Error {
  readonly status: number;
  readonly code: string;
  readonly seq?: number;

  constructor(status: number, detail: RefusalDetail) {
    super(detail.message);
    this.status = status;
    this.code = detail.code;
    this.seq = detail.seq;
  }
}

// Event ids start with "#", which a URL would treat as a fragment; the
// server accepts the bare 40-hex form in paths.
export function bareId(id: string): string {
  return id.startsWith("#") ? id.slice(1) : id;
}

export class ApiClient {
  readonly base: string;
  actor: string | null = null;

  constructor(base: string) {
    this.base = base.replace(/\/$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.actor) headers["X-Actor"] = this.actor;
    let payload: string | undefined;
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const response = await fetch(this.base + path, { method, headers, body: payload });
    const text = await response.text();
    const data = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const detail: RefusalDetail =
        data && typeof data.detail === "object"
          ? data.detail
          : { code: "HttpError", message: String(data?.detail ?? response.statusText) };
      throw new ApiRefusal(response.status, detail);
    }
    return data as T;
  }

  info(): Promise<ServiceInfo> {
    return this.request("GET", "/");
  }

  actors(): Promise<ActorRow[]> {
    return this.request("GET", "/actors");
  }

  registerActor(name: string, roles: string[]): Promise<{ actor: { id: string }; roles: string[] }> {
    return this.request("POST", "/actors", { name, roles });
  }

  models(): Promise<ModelSummary[]> {
    return this.request("GET", "/models");
  }

  loadModels(source: string): Promise<{ models: ModelSummary[] }> {
    return this.request("POST", "/models", { source });
  }

  individuals(model?: string): Promise<IndividualSummary[]> {
    const query = model ? `?model=${encodeURIComponent(model)}` : "";
    return this.request("GET", `/individuals${query}`);
  }

  individual(id: string): Promise<IndividualDetail> {
    return this.request("GET", `/individuals/${bareId(id)}`);
  }

  createIndividual(model: string, name: string): Promise<CommitPayload> {
    return this.request("POST", "/individuals", { model, name });
  }

  enabled(id: string): Promise<EnabledReport> {
    return this.request("GET", `/individuals/${bareId(id)}/enabled`);
  }

  submit(id: string, modelEvent: string, value: unknown): Promise<CommitPayload> {
    return this.request("POST", `/individuals/${bareId(id)}/events`, {
      model_event: modelEvent,
      value,
    });
  }

  events(sinceSeq: number, wait = 0): Promise<EventsPage> {
    return this.request("GET", `/events?since_seq=${sinceSeq}&wait=${wait}`);
  }
}
