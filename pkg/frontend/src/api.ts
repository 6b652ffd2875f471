// Talking to the run service: submission, report fetch, NDJSON streaming.

import { parseEventLine, type RunEvent } from './events.js';

export interface RunForm {
  feedCsv?: string;
  synthetic?: {
    seed: number;
    nSeries: number;
    groups: Array<[number, number]>;
    nSteps: number;
    baseVolatility?: number;
    tickPeriod?: number;
  };
  interval: number;
  samples: number;
  minSupport: number;
  complexityPenalty: number;
  pairMode: 'best' | 'mutual';
  minCounter: number;
  sameSectorOnly: boolean;
}

// Client-side bounds mirror the service's own validation so mistakes show
// up inline instead of as a rejected submission.
export function validateForm(form: RunForm): string[] {
  const problems: string[] = [];
  if (!form.feedCsv && !form.synthetic) problems.push('choose a feed: CSV path or synthetic config');
  if (form.feedCsv && form.synthetic) problems.push('choose only one feed source');
  if (!Number.isInteger(form.samples) || form.samples < 2) problems.push('samples must be an integer >= 2');
  if (!(form.interval > 0)) problems.push('interval must be > 0');
  if (!Number.isInteger(form.minSupport) || form.minSupport < 2) problems.push('min support must be an integer >= 2');
  if (!(form.complexityPenalty >= 0 && form.complexityPenalty < 1)) problems.push('complexity penalty must be in [0, 1)');
  if (!Number.isInteger(form.minCounter) || form.minCounter < 2) problems.push('min counter must be an integer >= 2');
  if (form.synthetic) {
    if (!Number.isInteger(form.synthetic.nSeries) || form.synthetic.nSeries < 1) problems.push('series count must be >= 1');
    if (!Number.isInteger(form.synthetic.nSteps) || form.synthetic.nSteps < 1) problems.push('ticks must be >= 1');
  }
  return problems;
}

export function submissionBody(form: RunForm): Record<string, unknown> {
  const feed = form.feedCsv
    ? { csv: form.feedCsv }
    : {
        synthetic: {
          seed: form.synthetic!.seed,
          n_series: form.synthetic!.nSeries,
          groups: form.synthetic!.groups,
          n_steps: form.synthetic!.nSteps,
          base_volatility: form.synthetic!.baseVolatility ?? 0.002,
          tick_period: form.synthetic!.tickPeriod ?? 1.0,
        },
      };
  return {
    feed,
    interval: form.interval,
    samples: form.samples,
    min_support: form.minSupport,
    complexity_penalty: form.complexityPenalty,
    pair_mode: form.pairMode,
    min_counter: form.minCounter,
    same_sector_only: form.sameSectorOnly,
  };
}

export async function launchRun(baseUrl: string, form: RunForm): Promise<string> {
  const problems = validateForm(form);
  if (problems.length) throw new Error(problems.join('; '));
  const resp = await fetch(`${baseUrl}/runs`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(submissionBody(form)),
  });
  const body = (await resp.json()) as { run_id?: string; error?: string };
  if (!resp.ok || !body.run_id) {
    throw new Error(body.error ?? `submission failed (${resp.status})`);
  }
  return body.run_id;
}

export interface RunReport {
  run_id: string;
  pairs: Array<Record<string, unknown>>;
  summary: { n_pairs: number; avg_r: number | null; sd_r: number | null } | null;
}

export async function fetchReport(baseUrl: string, runId: string): Promise<RunReport> {
  const resp = await fetch(`${baseUrl}/runs/${runId}/report`);
  if (!resp.ok) throw new Error(`report fetch failed (${resp.status})`);
  return (await resp.json()) as RunReport;
}

export interface StreamOptions {
  sameSectorOnly?: boolean;
  follow?: boolean;
  signal?: AbortSignal;
}

// Read the NDJSON stream incrementally, invoking onEvent per record. The
// returned promise resolves when the server closes the stream.
export async function streamEvents(
  baseUrl: string,
  runId: string,
  options: StreamOptions,
  onEvent: (ev: RunEvent) => void,
): Promise<void> {
  const params = new URLSearchParams();
  if (options.sameSectorOnly) params.set('same_sector_only', '1');
  if (options.follow) params.set('follow', '1');
  const query = params.toString();
  const url = `${baseUrl}/runs/${runId}/events${query ? `?${query}` : ''}`;
  const resp = await fetch(url, { signal: options.signal });
  if (!resp.body) throw new Error('response has no body stream');
  const reader = resp.body.getReader();
  const decoder = new TextDecoder();
  let buffered = '';
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    buffered += decoder.decode(value, { stream: true });
    const lines = buffered.split('\n');
    buffered = lines.pop() ?? '';
    for (const line of lines) {
      const ev = parseEventLine(line);
      if (ev) onEvent(ev);
    }
  }
  const tail = parseEventLine(buffered);
  if (tail) onEvent(tail);
}
