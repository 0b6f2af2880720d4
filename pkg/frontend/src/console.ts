import { ApiClient, ApiRefusal } from "./api.js";
import { buildControls, renderForm } from "./form.js";
import { renderHistory } from "./history.js";
import type { EventRecord, IndividualDetail, ModelSummary } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

// The whole console is one class owning one root element. It never
// invents state: everything rendered comes from a server response, and
// every submission goes through the one /events POST.
export class ProcessConsole {
  readonly root: HTMLElement;
  readonly client: ApiClient;

  private models: ModelSummary[] = [];
  private actorNames = new Map<string, string>();
  private currentId: string | null = null;
  private headSeq = -1;
  private watching = false;
  private pending = new Set<Promise<unknown>>();

  private sessionInput!: HTMLInputElement;
  private sessionLabel!: HTMLElement;
  private individualList!: HTMLElement;
  private modelSelect!: HTMLSelectElement;
  private nameInput!: HTMLInputElement;
  private statusChip!: HTMLElement;
  private detailTitle!: HTMLElement;
  private projection!: HTMLElement;
  private formPane!: HTMLElement;
  private historyPane!: HTMLElement;
  private toasts!: HTMLElement;

  constructor(client: ApiClient) {
    this.client = client;
    this.root = el("div", "console");
    this.buildShell();
  }

  // --- layout ---

  private buildShell(): void {
    const topbar = el("div", "topbar");
    topbar.appendChild(el("h1", "", "process console"));

    const session = el("div", "session");
    this.sessionInput = el("input", "session-input");
    this.sessionInput.placeholder = "actor name";
    this.sessionInput.setAttribute("list", "session-actors");
    session.appendChild(this.sessionInput);
    const enter = el("button", "session-enter", "enter session");
    enter.addEventListener("click", () =>
      this.track(this.selectActor(this.sessionInput.value.trim()))
    );
    session.appendChild(enter);
    this.sessionLabel = el("span", "session-label", "no session");
    session.appendChild(this.sessionLabel);
    topbar.appendChild(session);
    this.root.appendChild(topbar);

    const datalist = document.createElement("datalist");
    datalist.id = "session-actors";
    this.root.appendChild(datalist);

    const main = el("div", "main");

    const sidebar = el("div", "sidebar");
    sidebar.appendChild(el("h2", "", "individuals"));
    this.individualList = el("div", "individual-list");
    sidebar.appendChild(this.individualList);

    const creator = el("div", "creator");
    this.modelSelect = document.createElement("select");
    this.modelSelect.className = "creator-model";
    creator.appendChild(this.modelSelect);
    this.nameInput = el("input", "creator-name");
    this.nameInput.placeholder = "new individual";
    creator.appendChild(this.nameInput);
    const createBtn = el("button", "creator-go", "create");
    createBtn.addEventListener("click", () =>
      this.track(this.createIndividual(this.modelSelect.value, this.nameInput.value.trim()))
    );
    creator.appendChild(createBtn);
    sidebar.appendChild(creator);
    main.appendChild(sidebar);

    const detail = el("div", "detail");
    const header = el("div", "detail-header");
    this.detailTitle = el("h2", "detail-title", "pick an individual");
    header.appendChild(this.detailTitle);
    this.statusChip = el("span", "status-chip", "");
    header.appendChild(this.statusChip);
    detail.appendChild(header);

    this.projection = el("div", "projection");
    detail.appendChild(this.projection);

    detail.appendChild(el("h3", "", "fields"));
    this.formPane = el("div", "form-pane");
    detail.appendChild(this.formPane);

    detail.appendChild(el("h3", "", "history"));
    this.historyPane = el("div", "history-pane");
    detail.appendChild(this.historyPane);
    main.appendChild(detail);

    this.root.appendChild(main);

    this.toasts = el("div", "toasts");
    this.root.appendChild(this.toasts);
  }

  // --- lifecycle ---

  async init(): Promise<void> {
    const info = await this.client.info();
    this.headSeq = info.head_seq;
    await this.refreshDirectory();
  }

  async refreshDirectory(): Promise<void> {
    const [actors, models, individuals] = await Promise.all([
      this.client.actors(),
      this.client.models(),
      this.client.individuals(),
    ]);
    this.models = models;
    this.actorNames = new Map(actors.map((a) => [a.id, a.name]));

    const datalist = this.root.querySelector("#session-actors")!;
    datalist.textContent = "";
    for (const actor of actors) {
      const option = document.createElement("option");
      option.value = actor.name;
      datalist.appendChild(option);
    }

    this.modelSelect.textContent = "";
    for (const model of models) {
      const option = document.createElement("option");
      option.value = model.name;
      option.textContent = model.name;
      this.modelSelect.appendChild(option);
    }

    this.individualList.textContent = "";
    for (const ind of individuals) {
      const row = el("button", "individual-row", `${ind.name} (${ind.model})`);
      row.dataset.id = ind.id;
      row.addEventListener("click", () => this.track(this.openIndividual(ind.id)));
      this.individualList.appendChild(row);
    }
  }

  async selectActor(name: string): Promise<void> {
    if (!name) return;
    const known = [...this.actorNames.values()].includes(name);
    if (!known) {
      this.toast("error", `login error: unknown actor ${name}`);
      return;
    }
    this.client.actor = name;
    this.sessionLabel.textContent = `session: ${name}`;
    if (this.currentId) await this.refreshDetail();
  }

  async openIndividual(id: string): Promise<void> {
    this.currentId = id;
    await this.refreshDetail();
  }

  async refreshDetail(): Promise<void> {
    if (!this.currentId) return;
    const detail = await this.client.individual(this.currentId);
    this.renderDetail(detail);
    if (this.client.actor) {
      try {
        const report = await this.client.enabled(this.currentId);
        const controls = buildControls(
          report.fields,
          this.models.find((m) => m.name === detail.model)?.properties ?? []
        );
        renderForm(this.formPane, controls, (property, value) =>
          this.track(this.submitField(property, value))
        );
      } catch (err) {
        if (err instanceof ApiRefusal && err.status === 401) {
          this.toast("error", `login error: ${err.message}`);
          this.client.actor = null;
          this.sessionLabel.textContent = "no session";
        } else {
          throw err;
        }
      }
    } else {
      this.formPane.textContent = "";
      this.formPane.appendChild(el("p", "form-hint", "enter a session to act"));
    }
  }

  private renderDetail(detail: IndividualDetail): void {
    this.detailTitle.textContent = `${detail.name} — ${detail.model}`;
    const status = detail.properties["status"];
    this.statusChip.textContent = status === undefined ? "no status" : String(status);
    this.statusChip.dataset.status = status === undefined ? "" : String(status);

    this.projection.textContent = "";
    for (const key of Object.keys(detail.properties).sort()) {
      const row = el("div", "proj-row");
      row.appendChild(el("span", "proj-key", key));
      row.appendChild(el("span", "proj-value", String(detail.properties[key])));
      this.projection.appendChild(row);
    }

    renderHistory(this.historyPane, detail.history, this.actorNames);
    this.headSeq = Math.max(this.headSeq, ...detail.history.map((r) => r.seq));
  }

  async createIndividual(model: string, name: string): Promise<void> {
    if (!model || !name) return;
    try {
      const result = await this.client.createIndividual(model, name);
      this.toast("ok", `created ${name}`);
      await this.refreshDirectory();
      await this.openIndividual(result.trigger.id);
    } catch (err) {
      this.refusalToast(err);
    }
  }

  async submitField(property: string, value: string): Promise<void> {
    if (!this.currentId) return;
    try {
      const result = await this.client.submit(this.currentId, property, value);
      this.cascadeToast(result.trigger, result.cascade);
      await this.refreshDetail();
    } catch (err) {
      this.refusalToast(err);
      await this.refreshDetail();
      this.markRefusedRow(property, err);
    }
  }

  // a refused submission names its code right at the field it came from
  private markRefusedRow(property: string, err: unknown): void {
    if (!(err instanceof ApiRefusal)) return;
    const row = this.formPane.querySelector<HTMLElement>(
      `.field-row[data-property="${property}"]`
    );
    if (!row) return;
    let note = row.querySelector<HTMLElement>(".field-error");
    if (!note) {
      note = el("span", "field-error");
      row.appendChild(note);
    }
    note.textContent = err.code;
  }

  private cascadeToast(trigger: EventRecord, cascade: EventRecord[]): void {
    const parts = [`${trigger.type} = ${String(trigger.value)}`];
    for (const event of cascade) {
      parts.push(`↳ ${event.type} = ${String(event.value)}`);
    }
    this.toast("ok", parts.join("  "));
  }

  private refusalToast(err: unknown): void {
    if (err instanceof ApiRefusal) {
      this.toast("error", `${err.code}: ${err.message}`);
    } else {
      this.toast("error", String(err));
    }
  }

  toast(kind: "ok" | "error", text: string): void {
    const note = el("div", `toast ${kind}`, text);
    this.toasts.appendChild(note);
    setTimeout(() => note.remove(), 6000);
  }

  // --- incremental refresh ---

  // One long-poll in flight at a time; any new event triggers a redraw
  // of whatever is open. Small enough and honest: the server is the
  // only source of order.
  startWatching(): void {
    if (this.watching) return;
    this.watching = true;
    void this.watchLoop();
  }

  stopWatching(): void {
    this.watching = false;
  }

  private async watchLoop(): Promise<void> {
    while (this.watching) {
      try {
        const page = await this.client.events(this.headSeq, 25);
        if (!this.watching) return;
        if (page.events.length > 0) {
          this.headSeq = page.head_seq;
          await this.refreshDirectory();
          if (this.currentId) await this.refreshDetail();
        }
      } catch {
        await new Promise((r) => setTimeout(r, 1000));
      }
    }
  }

  // --- test hook: wait until every tracked interaction settled ---

  track<T>(promise: Promise<T>): Promise<T> {
    this.pending.add(promise);
    promise.finally(() => this.pending.delete(promise)).catch(() => undefined);
    return promise;
  }

  async whenIdle(): Promise<void> {
    while (this.pending.size > 0) {
      await Promise.allSettled([...this.pending]);
    }
  }
}
