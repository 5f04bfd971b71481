/** Latest-wins solve scheduling.
 *
 * Edits arrive much faster than solves should be issued. The scheduler
 * keeps only the newest requested body, waits out a debounce window,
 * and never has more than one request in flight. Responses carry the
 * sequence number of the request that produced them; anything at or
 * below the last applied sequence is dropped, so a stale response can
 * never overwrite a newer pose.
 */

export interface SchedulerOptions<B, R> {
  send: (body: B, seq: number) => Promise<R>;
  apply: (result: R, seq: number) => void;
  onError?: (error: unknown, seq: number) => void;
  debounceMs?: number;
}

export class SolveScheduler<B, R> {
  private seqCounter = 0;
  private applied = 0;
  private pending: { seq: number; body: B } | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private sending = false;
  private settled: (() => void)[] = [];
  readonly debounceMs: number;

  constructor(private readonly opts: SchedulerOptions<B, R>) {
    this.debounceMs = opts.debounceMs ?? 50;
  }

  /** Queue a body; newer calls replace it. Returns the sequence number. */
  request(body: B): number {
    const seq = ++this.seqCounter;
    this.pending = { seq, body };
    if (this.timer === null && !this.sending) {
      this.arm();
    }
    return seq;
  }

  get inFlight(): boolean {
    return this.sending;
  }

  get appliedSeq(): number {
    return this.applied;
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }

  /** Resolves once nothing is pending or in flight. */
  idle(): Promise<void> {
    if (!this.sending && this.pending === null && this.timer === null) {
      return Promise.resolve();
    }
    return new Promise((resolve) => this.settled.push(resolve));
  }

  /** Apply a response for `seq` unless something newer already displayed. */
  acceptResponse(seq: number, result: R): boolean {
    if (seq <= this.applied) {
      return false;
    }
    this.applied = seq;
    this.opts.apply(result, seq);
    return true;
  }

  private arm(): void {
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.debounceMs);
  }

  private async fire(): Promise<void> {
    if (this.sending || this.pending === null) {
      return;
    }
    const { seq, body } = this.pending;
    this.pending = null;
    this.sending = true;
    try {
      const result = await this.opts.send(body, seq);
      this.acceptResponse(seq, result);
    } catch (error) {
      this.opts.onError?.(error, seq);
    } finally {
      this.sending = false;
      if (this.pending !== null) {
        this.arm();
      } else {
        const waiters = this.settled;
        this.settled = [];
        for (const resolve of waiters) {
          resolve();
        }
      }
    }
  }
}
