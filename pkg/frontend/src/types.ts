/** Shapes exchanged with the annotation service. */

export interface GraphNode {
  id: string;
  label: string;
}

export interface GraphEdge {
  source: string;
  target: string;
  polarity: "POS" | "NEG";
}

export interface GraphDocument {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface Progress {
  done: number;
  total: number;
}

/** Mirrors the service task schema exactly; provenance never exists here. */
export interface TaskView {
  done: false;
  task_id: string;
  graph: GraphDocument;
  sentence_a: string;
  sentence_b: string;
  progress: Progress;
}

export interface DoneView {
  done: true;
  progress: Progress;
}

export type NextResponse = TaskView | DoneView;

export type Choice = "A" | "B";
export type Dimension = "faithfulness" | "coverage";

export interface LabelSubmission {
  task_id: string;
  annotator_id: string;
  faithfulness_choice: Choice;
  coverage_choice: Choice;
}

export interface SessionStats {
  session_id: string;
  n_tasks: number;
  labels: number;
  completion: Record<string, number>;
  preference: Record<Dimension, Record<string, number>>;
  counts: Record<Dimension, Record<string, number>>;
  kappa: Record<Dimension, Record<string, number>>;
}
