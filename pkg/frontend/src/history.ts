import { causeList, type EventRecord } from "./types.js";
import { bareId } from "./api.js";

export const SYSTEM_ACTOR = "#" + "0".repeat(40);

// Ordered event list with actor attribution. Every cause is a link that
// jumps to the conditioning event, so a reader can walk the chain of
// evidence backwards from any fact.
export function renderHistory(
  container: HTMLElement,
  records: EventRecord[],
  actorNames: Map<string, string>
): void {
  container.textContent = "";
  for (const record of records) {
    const row = document.createElement("div");
    row.className = "event-row";
    row.id = "ev-" + bareId(record.id);

    const seq = document.createElement("span");
    seq.className = "ev-seq";
    seq.textContent = String(record.seq);
    row.appendChild(seq);

    const type = document.createElement("span");
    type.className = "ev-type";
    type.textContent = record.type;
    row.appendChild(type);

    const value = document.createElement("span");
    value.className = "ev-value";
    value.textContent = record.value === null ? "" : String(record.value);
    row.appendChild(value);

    const actor = document.createElement("span");
    actor.className = "ev-actor";
    if (record.actor === SYSTEM_ACTOR) {
      actor.textContent = "SYSTEM";
      actor.classList.add("system");
    } else {
      actor.textContent = actorNames.get(record.actor) ?? record.actor.slice(0, 9);
    }
    row.appendChild(actor);

    const when = document.createElement("span");
    when.className = "ev-date";
    when.textContent = record.date;
    row.appendChild(when);

    const causes = document.createElement("span");
    causes.className = "ev-causes";
    for (const cause of causeList(record)) {
      const link = document.createElement("a");
      link.href = "#ev-" + bareId(cause);
      link.textContent = "←" + cause.slice(1, 8);
      link.className = "cause-link";
      link.addEventListener("click", (e) => {
        e.preventDefault();
        flash(container, "ev-" + bareId(cause));
      });
      causes.appendChild(link);
    }
    row.appendChild(causes);

    container.appendChild(row);
  }
}

function flash(container: HTMLElement, rowId: string): void {
  const target = container.querySelector<HTMLElement>("#" + rowId);
  if (!target) return;
  target.scrollIntoView?.({ block: "center" });
  target.classList.add("flash");
  setTimeout(() => target.classList.remove("flash"), 900);
}
