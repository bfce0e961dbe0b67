/** Shapes of the payloads the server answers with. */

export interface Position {
  line: number;
  column: number;
}

export interface SpanEntry {
  nodeId: number;
  kind: string;
  start: Position;
  end: Position;
}

export interface CriterionInfo {
  kind: string;
  detail: string;
}

export interface SlicePayload {
  file: string;
  operation: string;
  criterion: CriterionInfo;
  mode: string;
  slice: SpanEntry[];
  criterionNodes: SpanEntry[];
  visitedDefinitions: string[];
}

export interface ParameterInfo {
  name: string;
  type: string;
}

export interface OperationInfo {
  name: string;
  parameters: ParameterInfo[];
  returns: boolean;
  postConjuncts: number;
  stateVariables: string[];
}

export interface DocumentPayload {
  file: string;
  source: string;
  operations: OperationInfo[];
}

export interface SourceErrorEntry {
  message: string;
  start: Position;
  end: Position;
}

export interface SliceRequest {
  operation: string;
  criterion: string;
  mode?: string;
  source?: string;
  file?: string;
}
