// The console: a single-page, poll-driven UI over the gw REST API.
// Four views (editor, jobs, mydb, schema); one UI event loop; at most one
// in-flight request per view; API failures surface as explicit banners and
// a 401 anywhere drops back to the login screen.

import {
  ApiClient,
  ApiError,
  DatasetInfo,
  DatasetTable,
  JobView,
  TableDetail,
  TableInfo,
  TERMINAL_STATES,
} from "./api.js";
import { highlightHtml } from "./tokenizer.js";

export type ViewName = "editor" | "jobs" | "mydb" | "schema";

export interface ConsoleConfig {
  pollIntervalMs: number;
}

export interface ConsoleState {
  activeView: ViewName;
  editorBuffer: string;
  diagnostics: string;
  diagnosticsOffset: number | null;
  queue: string;
  partitions: string;
  jobs: JobView[];
  jobsCursor: number; // poll generation, bumped on every refresh
  selectedJob: string | null;
  tables: TableInfo[];
  datasets: DatasetInfo[];
  datasetTables: Map<string, DatasetTable[]>;
  tableDetail: TableDetail | null;
  banner: string;
}

const QUEUES = ["quick", "long"];

export class ConsoleApp {
  state: ConsoleState = {
    activeView: "editor",
    editorBuffer: "",
    diagnostics: "",
    diagnosticsOffset: null,
    queue: "quick",
    partitions: "",
    jobs: [],
    jobsCursor: 0,
    selectedJob: null,
    tables: [],
    datasets: [],
    datasetTables: new Map(),
    tableDetail: null,
    banner: "",
  };

  schemaRequestCount = 0; // observable: one call per lazy expansion
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private pollInFlight = false;

  constructor(
    public root: HTMLElement,
    public api: ApiClient,
    public config: ConsoleConfig = { pollIntervalMs: 2000 },
  ) {}

  // -- lifecycle ---------------------------------------------------------

  mount(): void {
    this.renderLogin();
  }

  destroy(): void {
    this.stopPolling();
  }

  private async guard<T>(work: () => Promise<T>): Promise<T | undefined> {
    try {
      this.state.banner = "";
      return await work();
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        this.stopPolling();
        this.api.token = null;
        this.renderLogin("session expired, sign in again");
        return undefined;
      }
      this.state.banner = err instanceof Error ? err.message : String(err);
      this.renderBanner();
      return undefined;
    }
  }

  // -- login -----------------------------------------------------------------

  renderLogin(message = ""): void {
    this.root.innerHTML = `
      <div class="login">
        <h1>gw console</h1>
        ${message ? `<div class="banner" id="banner">${message}</div>` : ""}
        <form id="login-form">
          <label>User <input id="login-user" autocomplete="username" /></label>
          <label>Password <input id="login-password" type="password" /></label>
          <button id="login-button" type="submit">Sign in</button>
        </form>
      </div>`;
    const form = this.root.querySelector("#login-form") as HTMLFormElement;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const user = (this.root.querySelector("#login-user") as HTMLInputElement).value;
      const password = (
        this.root.querySelector("#login-password") as HTMLInputElement
      ).value;
      void this.login(user, password);
    });
  }

  async login(user: string, password: string): Promise<boolean> {
    try {
      await this.api.login(user, password);
    } catch (err) {
      this.renderLogin(err instanceof Error ? err.message : String(err));
      return false;
    }
    this.renderShell();
    this.showView("editor");
    return true;
  }

  // -- shell & navigation ----------------------------------------------------------

  private renderShell(): void {
    this.root.innerHTML = `
      <header>
        <span class="brand">gw console</span>
        <nav>
          <button id="nav-editor">Query</button>
          <button id="nav-jobs">Jobs</button>
          <button id="nav-mydb">MyDB</button>
          <button id="nav-schema">Schema</button>
        </nav>
        <span class="whoami">${this.api.user ?? ""}</span>
      </header>
      <div class="banner" id="banner" hidden></div>
      <main id="view"></main>`;
    (["editor", "jobs", "mydb", "schema"] as ViewName[]).forEach((name) => {
      this.root
        .querySelector(`#nav-${name}`)!
        .addEventListener("click", () => this.showView(name));
    });
  }

  private renderBanner(): void {
    const banner = this.root.querySelector("#banner") as HTMLElement | null;
    if (!banner) {
      return;
    }
    banner.textContent = this.state.banner;
    (banner as HTMLElement & { hidden: boolean }).hidden = !this.state.banner;
  }

  showView(name: ViewName): void {
    this.state.activeView = name;
    this.stopPolling();
    if (name === "editor") {
      this.renderEditor();
    } else if (name === "jobs") {
      this.renderJobs();
      void this.refreshJobs();
      this.startPolling();
    } else if (name === "mydb") {
      this.renderMydb();
      void this.refreshTables();
    } else {
      this.renderSchema();
      void this.refreshDatasets();
    }
  }

  private viewRoot(): HTMLElement {
    return this.root.querySelector("#view") as HTMLElement;
  }

  // -- editor view ----------------------------------------------------------------

  private renderEditor(): void {
    const options = QUEUES.map(
      (q) =>
        `<option value="${q}"${q === this.state.queue ? " selected" : ""}>${q}</option>`,
    ).join("");
    this.viewRoot().innerHTML = `
      <section class="editor">
        <textarea id="sql" rows="6" spellcheck="false"
          placeholder="SELECT ...">${this.state.editorBuffer}</textarea>
        <pre id="highlight" class="highlight"></pre>
        <div class="editor-controls">
          <label>Queue <select id="queue">${options}</select></label>
          <label>Partitions <input id="partitions" size="3"
            value="${this.state.partitions}" /></label>
          <button id="check">Check syntax</button>
          <button id="submit">Submit</button>
        </div>
        <pre id="diagnostics" class="diagnostics"></pre>
      </section>`;
    const sql = this.viewRoot().querySelector("#sql") as HTMLTextAreaElement;
    sql.addEventListener("input", () => {
      this.state.editorBuffer = sql.value;
      this.refreshHighlight();
    });
    (this.viewRoot().querySelector("#queue") as HTMLSelectElement).addEventListener(
      "change",
      (event) => {
        this.state.queue = (event.target as HTMLSelectElement).value;
      },
    );
    (this.viewRoot().querySelector("#partitions") as HTMLInputElement).addEventListener(
      "input",
      (event) => {
        this.state.partitions = (event.target as HTMLInputElement).value;
      },
    );
    this.viewRoot()
      .querySelector("#check")!
      .addEventListener("click", () => void this.checkSyntax());
    this.viewRoot()
      .querySelector("#submit")!
      .addEventListener("click", () => void this.submitQuery());
    this.refreshHighlight();
    this.renderDiagnostics();
  }

  refreshHighlight(): void {
    const highlight = this.viewRoot().querySelector("#highlight");
    if (highlight) {
      highlight.innerHTML = highlightHtml(this.state.editorBuffer);
    }
  }

  private renderDiagnostics(): void {
    const out = this.viewRoot().querySelector("#diagnostics");
    if (!out) {
      return;
    }
    if (!this.state.diagnostics) {
      out.textContent = "";
      return;
    }
    let text = this.state.diagnostics;
    if (this.state.diagnosticsOffset !== null) {
      const caretLine = " ".repeat(this.state.diagnosticsOffset) + "^";
      text = `${this.state.editorBuffer}\n${caretLine}\n${text}`;
    }
    out.textContent = text;
  }

  async checkSyntax(): Promise<void> {
    await this.guard(async () => {
      try {
        await this.api.checkSyntax(this.state.editorBuffer);
        this.state.diagnostics = "syntax OK";
        this.state.diagnosticsOffset = null;
      } catch (err) {
        if (err instanceof ApiError && err.status === 400) {
          this.state.diagnostics = err.message;
          this.state.diagnosticsOffset = err.position ?? null;
        } else {
          throw err;
        }
      }
      this.renderDiagnostics();
    });
  }

  async submitQuery(): Promise<string | undefined> {
    return await this.guard(async () => {
      const partitions = this.state.partitions
        ? parseInt(this.state.partitions, 10)
        : undefined;
      try {
        const job = await this.api.submitQuery(
          this.state.editorBuffer,
          this.state.queue,
          partitions,
        );
        this.state.selectedJob = job;
        this.showView("jobs");
        return job;
      } catch (err) {
        if (err instanceof ApiError && err.status === 400) {
          this.state.diagnostics = err.message;
          this.state.diagnosticsOffset = err.position ?? null;
          this.renderDiagnostics();
          return undefined;
        }
        throw err;
      }
    });
  }

  // -- jobs view -----------------------------------------------------------------------

  private renderJobs(): void {
    this.viewRoot().innerHTML = `
      <section class="jobs">
        <table id="job-table">
          <thead><tr>
            <th>name</th><th>type</th><th>state</th><th>queue</th>
            <th>destination</th><th>error</th><th></th>
          </tr></thead>
          <tbody id="job-rows"></tbody>
        </table>
        <pre id="job-detail"></pre>
      </section>`;
    this.renderJobRows();
  }

  private renderJobRows(): void {
    const body = this.viewRoot().querySelector("#job-rows");
    if (!body) {
      return;
    }
    body.innerHTML = this.state.jobs
      .map((job) => {
        const cancellable = !TERMINAL_STATES.includes(job.state);
        const selected = job.id === this.state.selectedJob ? ' class="selected"' : "";
        return `<tr${selected} data-job="${job.id}">
          <td>${job.name}</td><td>${job.type}</td>
          <td class="state-${job.state}">${job.state}</td>
          <td>${job.queue}</td><td>${job.destination}</td>
          <td class="error">${job.error}</td>
          <td>${cancellable ? `<button data-cancel="${job.id}">cancel</button>` : ""}</td>
        </tr>`;
      })
      .join("");
    body.querySelectorAll("button[data-cancel]").forEach((button) => {
      button.addEventListener("click", () => {
        void this.cancelJob((button as HTMLElement).getAttribute("data-cancel")!);
      });
    });
    const detail = this.viewRoot().querySelector("#job-detail");
    if (detail && this.state.selectedJob) {
      const job = this.state.jobs.find((j) => j.id === this.state.selectedJob);
      detail.textContent = job ? JSON.stringify(job, null, 2) : "";
    }
  }

  async refreshJobs(): Promise<void> {
    if (this.pollInFlight) {
      return; // at most one in-flight request per view
    }
    this.pollInFlight = true;
    try {
      await this.guard(async () => {
        this.state.jobs = await this.api.listJobs();
        this.state.jobsCursor += 1;
        if (this.state.activeView === "jobs") {
          this.renderJobRows();
        }
      });
    } finally {
      this.pollInFlight = false;
    }
  }

  startPolling(): void {
    this.stopPolling();
    this.pollTimer = setInterval(
      () => void this.refreshJobs(),
      this.config.pollIntervalMs,
    );
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async cancelJob(id: string): Promise<void> {
    await this.guard(async () => {
      await this.api.cancelJob(id);
      await this.refreshJobs();
    });
  }

  // -- MyDB view ------------------------------------------------------------------

  private renderMydb(): void {
    this.viewRoot().innerHTML = `
      <section class="mydb">
        <div class="upload">
          <input id="upload-name" placeholder="table name" />
          <input id="upload-file" type="file" accept=".csv" />
          <button id="upload-button">Upload CSV</button>
        </div>
        <table>
          <thead><tr><th>table</th><th>rows</th><th>columns</th><th></th></tr></thead>
          <tbody id="table-rows"></tbody>
        </table>
      </section>`;
    this.viewRoot()
      .querySelector("#upload-button")!
      .addEventListener("click", () => {
        const name = (
          this.viewRoot().querySelector("#upload-name") as HTMLInputElement
        ).value;
        const input = this.viewRoot().querySelector(
          "#upload-file",
        ) as HTMLInputElement;
        const file = input.files && input.files[0];
        if (name && file) {
          void this.uploadTable(name, file);
        }
      });
    this.renderTableRows();
  }

  private renderTableRows(): void {
    const body = this.viewRoot().querySelector("#table-rows");
    if (!body) {
      return;
    }
    body.innerHTML = this.state.tables
      .map(
        (t) => `<tr data-table="${t.name}">
          <td>${t.name}</td><td>${t.rows}</td><td>${t.columns.join(", ")}</td>
          <td>
            <button data-download="${t.name}">download</button>
            <button data-delete="${t.name}">delete</button>
          </td>
        </tr>`,
      )
      .join("");
    body.querySelectorAll("button[data-download]").forEach((button) => {
      button.addEventListener("click", () => {
        void this.downloadTable((button as HTMLElement).getAttribute("data-download")!);
      });
    });
    body.querySelectorAll("button[data-delete]").forEach((button) => {
      button.addEventListener("click", () => {
        void this.deleteTable((button as HTMLElement).getAttribute("data-delete")!);
      });
    });
  }

  async refreshTables(): Promise<void> {
    await this.guard(async () => {
      this.state.tables = await this.api.listTables();
      if (this.state.activeView === "mydb") {
        this.renderTableRows();
      }
    });
  }

  async uploadTable(name: string, file: Blob): Promise<string | undefined> {
    return await this.guard(async () => {
      const job = await this.api.uploadTable(name, file);
      this.state.selectedJob = job;
      return job;
    });
  }

  async downloadTable(name: string): Promise<Uint8Array | undefined> {
    return await this.guard(async () => {
      const bytes = await this.api.downloadTable(name);
      // hand the bytes to the browser when object URLs exist (real browsers);
      // scripted tests consume the returned bytes directly
      const urlApi = (globalThis as { URL?: typeof URL }).URL;
      if (urlApi && typeof urlApi.createObjectURL === "function") {
        const link = document.createElement("a");
        link.href = urlApi.createObjectURL(new Blob([bytes as BlobPart]));
        link.download = `${name}.csv`;
        link.click();
      }
      return bytes;
    });
  }

  async deleteTable(name: string): Promise<void> {
    await this.guard(async () => {
      const confirmFn = (globalThis as { confirm?: (q: string) => boolean }).confirm;
      if (confirmFn && !confirmFn(`Delete table ${name}?`)) {
        return;
      }
      await this.api.deleteTable(name);
      await this.refreshTables();
    });
  }

  // -- schema view -------------------------------------------------------------------

  private renderSchema(): void {
    this.viewRoot().innerHTML = `
      <section class="schema">
        <ul id="dataset-tree" class="tree"></ul>
        <div id="schema-detail"></div>
      </section>`;
    this.renderDatasetTree();
  }

  private renderDatasetTree(): void {
    const tree = this.viewRoot().querySelector("#dataset-tree");
    if (!tree) {
      return;
    }
    tree.innerHTML = this.state.datasets
      .map((dataset) => {
        const tables = this.state.datasetTables.get(dataset.name);
        const children = tables
          ? `<ul>${tables
              .map(
                (t) =>
                  `<li><a href="#" data-table="${dataset.name}:${t.name}">` +
                  `${t.name} (${t.columns})</a></li>`,
              )
              .join("")}</ul>`
          : "";
        return `<li>
          <a href="#" data-dataset="${dataset.name}">${dataset.name}</a>
          <span class="kind">${dataset.kind}</span>
          ${children}
        </li>`;
      })
      .join("");
    tree.querySelectorAll("a[data-dataset]").forEach((link) => {
      link.addEventListener("click", (event) => {
        event.preventDefault();
        void this.expandDataset((link as HTMLElement).getAttribute("data-dataset")!);
      });
    });
    tree.querySelectorAll("a[data-table]").forEach((link) => {
      link.addEventListener("click", (event) => {
        event.preventDefault();
        const [dataset, table] = (link as HTMLElement)
          .getAttribute("data-table")!
          .split(":");
        void this.showTableDetail(dataset, table);
      });
    });
  }

  async refreshDatasets(): Promise<void> {
    await this.guard(async () => {
      this.state.datasets = await this.api.listDatasets();
      if (this.state.activeView === "schema") {
        this.renderDatasetTree();
      }
    });
  }

  async expandDataset(name: string): Promise<void> {
    await this.guard(async () => {
      // lazy: one schema call per expansion, cached afterwards
      if (!this.state.datasetTables.has(name)) {
        this.schemaRequestCount += 1;
        this.state.datasetTables.set(name, await this.api.listDatasetTables(name));
      }
      if (this.state.activeView === "schema") {
        this.renderDatasetTree();
      }
    });
  }

  async showTableDetail(dataset: string, table: string): Promise<void> {
    await this.guard(async () => {
      this.state.tableDetail = await this.api.tableDetail(dataset, table);
      const detail = this.viewRoot().querySelector("#schema-detail");
      if (!detail || !this.state.tableDetail) {
        return;
      }
      const rows = this.state.tableDetail.columns
        .map(
          (c) => `<tr>
            <td>${c.name}</td><td>${c.type}</td>
            <td>${c.nullable ? "null" : "not null"}</td>
            <td class="meta-unit">${c.metadata.unit}</td>
            <td class="meta-summary">${c.metadata.summary}</td>
            <td class="meta-content">${c.metadata.content}</td>
          </tr>`,
        )
        .join("");
      detail.innerHTML = `
        <h2>${this.state.tableDetail.dataset}:${this.state.tableDetail.name}</h2>
        <p class="table-summary">${this.state.tableDetail.metadata.summary}</p>
        <table>
          <thead><tr><th>column</th><th>type</th><th></th>
            <th>unit</th><th>description</th><th>content id</th></tr></thead>
          <tbody>${rows}</tbody>
        </table>`;
    });
  }
}
