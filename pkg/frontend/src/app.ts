/** Wire the page: load the document, offer criteria, slice on demand,
 * and paint the answer over the source.  Clicking a spot in the source
 * slices at that position.  A sequence number guards against a slow
 * answer overpainting a newer one.
 */

import { fetchDocument, postSlice, RequestRejected, SourceRejected } from "./api.js";
import {
  clickCriterion,
  criterionOptions,
  latestWins,
  paint,
  ROLE_CLASSES,
} from "./model.js";
import type { DocumentPayload, SlicePayload } from "./types.js";

const base = "";

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) throw new Error(`missing element #${id}`);
  return found as T;
}

const operationSelect = element<HTMLSelectElement>("operation");
const criterionSelect = element<HTMLSelectElement>("criterion");
const modeSelect = element<HTMLSelectElement>("mode");
const sourcePane = element<HTMLPreElement>("source");
const statusLine = element<HTMLElement>("status");
const visitedLine = element<HTMLElement>("visited");

let loaded: DocumentPayload | null = null;
let requestSeq = 0;

function showStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.className = isError ? "error" : "";
}

function renderSource(payload: SlicePayload | null): void {
  if (loaded === null) return;
  const segments = paint(
    loaded.source,
    payload?.slice ?? [],
    payload?.criterionNodes ?? [],
  );
  sourcePane.textContent = "";
  for (const segment of segments) {
    const span = document.createElement("span");
    span.textContent = segment.text;
    span.className = ROLE_CLASSES[segment.role];
    span.dataset["start"] = String(segment.start);
    sourcePane.appendChild(span);
  }
  visitedLine.textContent = payload
    ? `definitions visited: ${payload.visitedDefinitions.join(", ")}`
    : "";
}

function fillCriteria(): void {
  if (loaded === null) return;
  const name = operationSelect.value;
  const operation = loaded.operations.find((op) => op.name === name);
  criterionSelect.textContent = "";
  for (const option of operation ? criterionOptions(operation) : []) {
    const entry = document.createElement("option");
    entry.value = option;
    entry.textContent = option;
    criterionSelect.appendChild(entry);
  }
}

async function slice(criterion: string): Promise<void> {
  const seq = ++requestSeq;
  showStatus("slicing ...");
  try {
    const payload = await postSlice(base, {
      operation: operationSelect.value,
      criterion,
      mode: modeSelect.value,
    });
    if (!latestWins(requestSeq, seq)) return;
    renderSource(payload);
    showStatus(
      `${payload.operation} ${payload.criterion.kind}` +
        (payload.criterion.detail ? `:${payload.criterion.detail}` : "") +
        ` (${payload.mode}): ${payload.slice.length} node(s)`,
    );
  } catch (error) {
    if (!latestWins(requestSeq, seq)) return;
    if (error instanceof SourceRejected || error instanceof RequestRejected) {
      showStatus(error.message, true);
      return;
    }
    throw error;
  }
}

function offsetForClick(event: MouseEvent): number | null {
  const target = event.target;
  if (!(target instanceof HTMLSpanElement)) return null;
  const start = Number(target.dataset["start"] ?? "0");
  const within = (() => {
    const caret = document.caretPositionFromPoint?.(event.clientX, event.clientY);
    if (caret && caret.offsetNode === target.firstChild) return caret.offset;
    return 0;
  })();
  return start + within;
}

async function start(): Promise<void> {
  loaded = await fetchDocument(base);
  element<HTMLElement>("file").textContent = loaded.file;
  operationSelect.textContent = "";
  for (const operation of loaded.operations) {
    const entry = document.createElement("option");
    entry.value = operation.name;
    const parameters = operation.parameters
      .map((p) => `${p.name}: ${p.type}`)
      .join(", ");
    entry.textContent = `${operation.name}(${parameters})`;
    operationSelect.appendChild(entry);
  }
  fillCriteria();
  renderSource(null);
  showStatus("ready");

  operationSelect.addEventListener("change", fillCriteria);
  element<HTMLButtonElement>("go").addEventListener("click", () => {
    void slice(criterionSelect.value);
  });
  sourcePane.addEventListener("click", (event) => {
    if (loaded === null) return;
    const offset = offsetForClick(event);
    if (offset === null) return;
    void slice(clickCriterion(loaded.source, offset));
  });
}

void start().catch((error) => showStatus(String(error), true));
