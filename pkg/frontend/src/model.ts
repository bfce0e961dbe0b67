/** Pure span arithmetic: from payload entries to painted source text.
 *
 * Spans are half-open, with 1-based lines and columns.  Painting maps
 * every character to a role; a character inside both a slice span and
 * a criterion span shows as criterion, so the thing being asked about
 * is always visible on top of what feeds it.
 */

import type { OperationInfo, Position, SpanEntry } from "./types.js";

export type Role = "plain" | "slice" | "criterion";

export interface Segment {
  text: string;
  role: Role;
  /** character offset of the segment's first character */
  start: number;
}

/** Offset of each line's first character; index 0 holds line 1. */
export function lineStarts(source: string): number[] {
  const starts = [0];
  for (let i = 0; i < source.length; i++) {
    if (source[i] === "\n") starts.push(i + 1);
  }
  return starts;
}

export function offsetOf(starts: number[], position: Position): number {
  const base = starts[position.line - 1];
  if (base === undefined) throw new Error(`line ${position.line} out of range`);
  return base + position.column - 1;
}

export function positionAt(starts: number[], offset: number): Position {
  let line = 1;
  for (let i = starts.length - 1; i >= 0; i--) {
    const start = starts[i]!;
    if (start <= offset) {
      line = i + 1;
      return { line, column: offset - start + 1 };
    }
  }
  return { line: 1, column: offset + 1 };
}

/** Every character offset covered by the given spans. */
export function coveredOffsets(source: string, entries: SpanEntry[]): Set<number> {
  const starts = lineStarts(source);
  const covered = new Set<number>();
  for (const entry of entries) {
    const from = offsetOf(starts, entry.start);
    const to = offsetOf(starts, entry.end);
    for (let i = from; i < to && i < source.length; i++) covered.add(i);
  }
  return covered;
}

/** The 1-based line numbers the spans touch. */
export function coveredLines(entries: SpanEntry[]): Set<number> {
  const lines = new Set<number>();
  for (const entry of entries) {
    for (let line = entry.start.line; line <= entry.end.line; line++) {
      lines.add(line);
    }
  }
  return lines;
}

/** Split the source into runs of equal role, criterion on top. */
export function paint(
  source: string,
  slice: SpanEntry[],
  criterionNodes: SpanEntry[],
): Segment[] {
  const inSlice = coveredOffsets(source, slice);
  const inCriterion = coveredOffsets(source, criterionNodes);
  const roleAt = (i: number): Role =>
    inCriterion.has(i) ? "criterion" : inSlice.has(i) ? "slice" : "plain";

  const segments: Segment[] = [];
  let from = 0;
  for (let i = 1; i <= source.length; i++) {
    if (i === source.length || roleAt(i) !== roleAt(from)) {
      segments.push({ text: source.slice(from, i), role: roleAt(from), start: from });
      from = i;
    }
  }
  return segments;
}

/** The offsets a segment list shows as highlighted, for fidelity checks. */
export function paintedOffsets(segments: Segment[]): Set<number> {
  const covered = new Set<number>();
  for (const segment of segments) {
    if (segment.role === "plain") continue;
    for (let i = 0; i < segment.text.length; i++) covered.add(segment.start + i);
  }
  return covered;
}

export const ROLE_CLASSES: Record<Role, string> = {
  plain: "role-plain",
  slice: "role-slice",
  criterion: "role-criterion",
};

/** The criterion spellings one operation supports, result first. */
export function criterionOptions(operation: OperationInfo): string[] {
  const options: string[] = [];
  if (operation.returns) options.push("result");
  for (const variable of operation.stateVariables) options.push(`state:${variable}`);
  for (let i = 1; i <= operation.postConjuncts; i++) options.push(`post:${i}`);
  return options;
}

/** The position criterion for a click at the given character offset. */
export function clickCriterion(source: string, offset: number): string {
  const clamped = Math.max(0, Math.min(offset, source.length - 1));
  const position = positionAt(lineStarts(source), clamped);
  return `at:${position.line}:${position.column}`;
}

/** True when a response carrying sequence number `arrived` is current. */
export function latestWins(current: number, arrived: number): boolean {
  return arrived === current;
}
