// Typed client for the searchgym HTTP API. All mutations go through here;
// the UI holds no state the service does not confirm.

import type {
  ActivationReport,
  ApiErrorBody,
  AppEntry,
  ConfigEntry,
  FilterNode,
  SearchResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

export class ServiceUnreachable extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${cause}`);
  }
}

export interface SearchParams {
  query_text: string;
  k: number;
  mode: "semantic" | "keyword" | "auto";
  filter?: FilterNode;
}

export class ApiClient {
  constructor(
    private base: string,
    private fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(`${this.base}${path}`, {
        method,
        headers: body !== undefined ? { "content-type": "application/json" } : undefined,
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (err) {
      throw new ServiceUnreachable(err);
    }
    if (!resp.ok) {
      let detail: ApiErrorBody = { code: "http_error", message: `HTTP ${resp.status}` };
      try {
        const parsed = (await resp.json()) as { detail?: ApiErrorBody };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the generic detail
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  listConfigs(): Promise<ConfigEntry[]> {
    return this.request("GET", "/configs");
  }

  getConfig(hash: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/configs/${hash}`);
  }

  putConfig(config: unknown): Promise<{ hash: string; kind: string }> {
    return this.request("POST", "/configs", config);
  }

  listApps(): Promise<AppEntry[]> {
    return this.request("GET", "/apps");
  }

  activate(appHash: string): Promise<ActivationReport> {
    return this.request("POST", `/apps/${appHash}/activate`, {});
  }

  search(appHash: string, params: SearchParams): Promise<SearchResponse> {
    return this.request("POST", `/apps/${appHash}/search`, params);
  }

  swap(appHash: string, vectorset: string): Promise<ActivationReport> {
    return this.request("POST", `/apps/${appHash}/swap`, { vectorset });
  }

  metrics(): Promise<Record<string, unknown>> {
    return this.request("GET", "/metrics");
  }
}
