// Event grammar spoken by the run service. One JSON record per line; the
// console consumes these verbatim and never derives numbers of its own.

export interface RunStartedEvent {
  event: 'run_started';
  run_id: string;
  n_samples: number;
  intervals: number[];
}

export interface SampleTakenEvent {
  event: 'sample_taken';
  index: number;
  timestamp: number;
}

export interface ClassificationDoneEvent {
  event: 'classification_done';
  n_series: number;
  n_nodes: number;
  n_pairs: number;
}

export interface PairEvent {
  event: 'pair';
  pair_id: number;
  a: string;
  b: string;
  counter: number;
  r: number | null;
  sector_a: string;
  sector_b: string;
}

export interface PriceEvent {
  event: 'price';
  symbol: string;
  price: number;
  pct_since_start: number;
  timestamp: number;
}

export interface RunFailedEvent {
  event: 'run_failed';
  reason: string;
}

export interface StreamErrorEvent {
  event: 'error';
  reason: string;
}

export type RunEvent =
  | RunStartedEvent
  | SampleTakenEvent
  | ClassificationDoneEvent
  | PairEvent
  | PriceEvent
  | RunFailedEvent
  | StreamErrorEvent;

const KNOWN_EVENTS = new Set([
  'run_started', 'sample_taken', 'classification_done', 'pair', 'price',
  'run_failed', 'error',
]);

export function parseEventLine(line: string): RunEvent | null {
  const trimmed = line.trim();
  if (!trimmed) return null;
  const record = JSON.parse(trimmed) as { event?: string };
  if (!record.event || !KNOWN_EVENTS.has(record.event)) {
    return null; // forward compatible: unknown kinds are skipped
  }
  return record as RunEvent;
}

export function parseEventLines(text: string): RunEvent[] {
  const events: RunEvent[] = [];
  for (const line of text.split('\n')) {
    const ev = parseEventLine(line);
    if (ev) events.push(ev);
  }
  return events;
}
