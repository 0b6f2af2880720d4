import type { EnabledField, PropertySummary } from "./types.js";

// What kind of input a property gets. Derived from the model's
// restrictions, never guessed from the current value.
export interface FieldControl {
  property: string;
  kind: "text" | "number" | "select";
  options: string[];
  computed: boolean;
  enabled: boolean;
  reason: string;
  current: string;
}

function restrictionValue(summary: PropertySummary | undefined, type: string): string | null {
  if (!summary) return null;
  const hit = summary.restrictions.find((r) => r.type === type);
  return hit ? hit.value : null;
}

// A SetRange like `"low" | "mid" | "high"` enumerates options; anything
// with query syntax in it stays a free-text field.
function rangeOptions(raw: string | null): string[] | null {
  if (!raw || raw.includes("$") || raw.includes("(")) return null;
  const parts = raw.split("|").map((p) => p.trim().replace(/^"|"$/g, ""));
  return parts.length > 1 && parts.every((p) => p.length > 0) ? parts : null;
}

export function fieldControl(
  field: EnabledField,
  summary: PropertySummary | undefined
): FieldControl {
  const control: FieldControl = {
    property: field.property,
    kind: "text",
    options: [],
    computed: field.computed,
    enabled: field.enabled,
    reason: field.reason,
    current: field.value === null ? "" : String(field.value),
  };
  const options = rangeOptions(restrictionValue(summary, "SetRange"));
  const datatype = (restrictionValue(summary, "DataType") || "").toLowerCase();
  if (options) {
    control.kind = "select";
    control.options = options;
  } else if (datatype === "integer" || datatype === "float") {
    control.kind = "number";
  } else if (datatype === "boolean") {
    control.kind = "select";
    control.options = ["true", "false"];
  }
  return control;
}

export function buildControls(
  fields: EnabledField[],
  properties: PropertySummary[]
): FieldControl[] {
  const byName = new Map(properties.map((p) => [p.property, p]));
  return fields.map((f) => fieldControl(f, byName.get(f.property)));
}

// One row per reported field: label, input, send button, reason badge.
// Disabled and denied fields stay visible but inert, with the refusal
// code shown, so the user can see what the process is waiting for.
export function renderForm(
  container: HTMLElement,
  controls: FieldControl[],
  onSubmit: (property: string, value: string) => void
): void {
  container.textContent = "";
  for (const control of controls) {
    const row = document.createElement("div");
    row.className = "field-row";
    row.dataset.property = control.property;

    const label = document.createElement("label");
    label.textContent = control.property;
    row.appendChild(label);

    let input: HTMLInputElement | HTMLSelectElement;
    if (control.kind === "select") {
      input = document.createElement("select");
      for (const option of control.options) {
        const el = document.createElement("option");
        el.value = option;
        el.textContent = option;
        input.appendChild(el);
      }
    } else {
      input = document.createElement("input");
      input.type = control.kind === "number" ? "number" : "text";
      if (control.current) input.placeholder = control.current;
    }
    input.className = "field-input";
    input.disabled = !control.enabled;
    row.appendChild(input);

    const send = document.createElement("button");
    send.textContent = control.computed ? "auto" : "send";
    send.className = "field-send";
    send.disabled = !control.enabled;
    if (control.enabled) {
      send.addEventListener("click", () => onSubmit(control.property, input.value));
    }
    row.appendChild(send);

    const badge = document.createElement("span");
    badge.className = "field-reason";
    if (control.computed) {
      badge.textContent = "computed";
      badge.classList.add("computed");
    } else if (!control.enabled) {
      badge.textContent = control.reason;
      badge.classList.add(control.reason === "PermissionDenied" ? "denied" : "blocked");
    }
    row.appendChild(badge);

    container.appendChild(row);
  }
}
