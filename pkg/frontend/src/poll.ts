// Polling helper: 1 s cadence, exponential backoff on failures.

export type SleepFn = (ms: number) => Promise<void>;

const realSleep: SleepFn = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export type PollOptions = {
  intervalMs?: number;
  maxBackoffMs?: number;
  maxAttempts?: number;
  sleep?: SleepFn;
};

/**
 * Repeatedly calls `fetchOnce` until `done` returns true for its value.
 * Errors back off exponentially (1s, 2s, 4s, ... capped) instead of
 * aborting; `maxAttempts` bounds the total number of calls.
 */
export async function pollUntil<T>(
  fetchOnce: () => Promise<T>,
  done: (value: T) => boolean,
  options: PollOptions = {},
): Promise<T> {
  const interval = options.intervalMs ?? 1000;
  const maxBackoff = options.maxBackoffMs ?? 16000;
  const maxAttempts = options.maxAttempts ?? 600;
  const sleep = options.sleep ?? realSleep;

  let failures = 0;
  let lastError: unknown = null;
  for (let attempt = 0; attempt < maxAttempts; attempt++) {
    try {
      const value = await fetchOnce();
      failures = 0;
      if (done(value)) return value;
      await sleep(interval);
    } catch (error) {
      lastError = error;
      failures += 1;
      const backoff = Math.min(interval * 2 ** failures, maxBackoff);
      await sleep(backoff);
    }
  }
  throw lastError ?? new Error("polling gave up before completion");
}
