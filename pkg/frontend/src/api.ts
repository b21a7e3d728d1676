// Typed client for the gw REST API. The console performs no computation on
// query results beyond display; everything here is a thin fetch wrapper.

export interface MetadataTriple {
  content: string;
  unit: string;
  summary: string;
}

export interface JobView {
  id: string;
  name: string;
  type: string;
  state: string;
  queue: string;
  submitted: string | null;
  started: string | null;
  finished: string | null;
  error: string;
  destination: string;
  branches: Record<string, string>;
}

export interface TableInfo {
  name: string;
  rows: number;
  columns: string[];
}

export interface DatasetInfo {
  name: string;
  kind: string;
  dialect: string;
  location: string;
}

export interface DatasetTable {
  name: string;
  columns: number;
}

export interface ColumnDetail {
  name: string;
  type: string;
  nullable: boolean;
  metadata: MetadataTriple;
}

export interface TableDetail {
  name: string;
  dataset: string;
  metadata: MetadataTriple;
  columns: ColumnDetail[];
}

export interface Diagnostics {
  code: string;
  message: string;
  position?: number;
}

export const TERMINAL_STATES = ["completed", "failed", "cancelled", "timed-out"];

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public position?: number,
  ) {
    super(message);
  }
}

async function raise(response: Response): Promise<never> {
  let code = "http-error";
  let message = `${response.status} ${response.statusText}`;
  let position: number | undefined;
  try {
    const body = await response.json();
    code = body.code ?? code;
    message = body.message ?? message;
    position = body.position;
  } catch {
    // non-JSON error body: keep the status line
  }
  throw new ApiError(response.status, code, message, position);
}

export class ApiClient {
  token: string | null = null;
  user: string | null = null;

  constructor(
    public baseUrl: string = "",
    private fetchImpl: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const out: Record<string, string> = { ...extra };
    if (this.token) {
      out["Authorization"] = `Bearer ${this.token}`;
    }
    return out;
  }

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      ...init,
      headers: this.headers((init.headers as Record<string, string>) ?? {}),
    });
    if (!response.ok) {
      await raise(response);
    }
    return response;
  }

  private async json<T>(path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  async login(user: string, password: string): Promise<void> {
    const body = await this.json<{ token: string; user: string }>("/api/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ user, password }),
    });
    this.token = body.token;
    this.user = body.user;
  }

  async logout(): Promise<void> {
    if (this.token) {
      await this.request(`/api/sessions/${this.token}`, { method: "DELETE" });
      this.token = null;
      this.user = null;
    }
  }

  async checkSyntax(sql: string): Promise<void> {
    await this.json("/api/queries", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ sql, syntax_check_only: true }),
    });
  }

  async submitQuery(sql: string, queue: string, partitions?: number): Promise<string> {
    const payload: Record<string, unknown> = { sql, queue };
    if (partitions) {
      payload.partitions = partitions;
    }
    const body = await this.json<{ job: string }>("/api/queries", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return body.job;
  }

  listJobs(): Promise<JobView[]> {
    return this.json<JobView[]>("/api/jobs");
  }

  getJob(id: string): Promise<JobView> {
    return this.json<JobView>(`/api/jobs/${id}`);
  }

  async cancelJob(id: string): Promise<void> {
    await this.request(`/api/jobs/${id}`, { method: "DELETE" });
  }

  listTables(): Promise<TableInfo[]> {
    return this.json<TableInfo[]>("/api/mydb/tables");
  }

  async downloadTable(name: string, format = "csv"): Promise<Uint8Array> {
    const response = await this.request(
      `/api/mydb/tables/${encodeURIComponent(name)}?format=${format}`,
    );
    return new Uint8Array(await response.arrayBuffer());
  }

  async deleteTable(name: string): Promise<void> {
    await this.request(`/api/mydb/tables/${encodeURIComponent(name)}`, {
      method: "DELETE",
    });
  }

  async uploadTable(name: string, data: Blob, format = "csv"): Promise<string> {
    const form = new FormData();
    form.append("file", data, `${name}.${format}`);
    const body = await this.json<{ job: string }>(
      `/api/mydb/tables?table=${encodeURIComponent(name)}&format=${format}`,
      { method: "POST", body: form },
    );
    return body.job;
  }

  listDatasets(): Promise<DatasetInfo[]> {
    return this.json<DatasetInfo[]>("/api/schema/datasets");
  }

  listDatasetTables(dataset: string): Promise<DatasetTable[]> {
    return this.json<DatasetTable[]>(
      `/api/schema/datasets/${encodeURIComponent(dataset)}/tables`,
    );
  }

  tableDetail(dataset: string, table: string): Promise<TableDetail> {
    return this.json<TableDetail>(
      `/api/schema/datasets/${encodeURIComponent(dataset)}/tables/${encodeURIComponent(table)}`,
    );
  }
}
