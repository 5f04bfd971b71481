/** Thin typed wrapper over the service endpoints. */

import type {
  BootstrapResponse,
  EffectorWire,
  HealthResponse,
  ShapeWire,
  SkeletonResponse,
  SolveResponse,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    readonly type: string,
    readonly path: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SolveRequest {
  shape: ShapeWire;
  effectors: EffectorWire[];
}

export interface BootstrapRequest {
  scene: unknown;
  character?: { skeleton: unknown; map: Record<string, string> };
  recovery?: { max_effectors?: number; error_threshold?: number };
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...a) => globalThis.fetch(...a),
  ) {}

  health(): Promise<HealthResponse> {
    return this.req<HealthResponse>("GET", "/health");
  }

  skeleton(): Promise<SkeletonResponse> {
    return this.req<SkeletonResponse>("GET", "/skeleton");
  }

  solve(body: SolveRequest): Promise<SolveResponse> {
    return this.req<SolveResponse>("POST", "/solve", body);
  }

  bootstrap(body: BootstrapRequest): Promise<BootstrapResponse> {
    return this.req<BootstrapResponse>("POST", "/scene/bootstrap", body);
  }

  invertShape(body: unknown): Promise<unknown> {
    return this.req("POST", "/invert-shape", body);
  }

  recoverEffectors(body: unknown): Promise<unknown> {
    return this.req("POST", "/recover-effectors", body);
  }

  private async req<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    let parsed: unknown = null;
    try {
      parsed = await response.json();
    } catch {
      // fall through: non-JSON bodies become a generic ServiceError below
    }
    if (!response.ok) {
      const envelope = (parsed as { error?: { type?: string; path?: string; message?: string } })?.error;
      throw new ServiceError(
        envelope?.type ?? "http",
        envelope?.path ?? "",
        envelope?.message ?? `${method} ${path} failed with ${response.status}`,
        response.status,
      );
    }
    return parsed as T;
  }
}
