import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function stubFetch(
  handler: (url: string, init?: RequestInit) => { status: number; body: unknown },
): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const { status, body } = handler(String(input), init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
}

describe("api client", () => {
  it("stores the token and sends it as a bearer header", async () => {
    const seen: Array<{ url: string; auth?: string }> = [];
    const client = new ApiClient(
      "http://x",
      stubFetch((url, init) => {
        const headers = (init?.headers ?? {}) as Record<string, string>;
        seen.push({ url, auth: headers["Authorization"] });
        if (url.endsWith("/api/sessions")) {
          return { status: 200, body: { token: "t0ken", user: "alice" } };
        }
        return { status: 200, body: [] };
      }),
    );
    await client.login("alice", "pw");
    expect(client.token).toBe("t0ken");
    await client.listJobs();
    expect(seen[1].auth).toBe("Bearer t0ken");
  });

  it("maps structured errors onto ApiError", async () => {
    const client = new ApiClient(
      "http://x",
      stubFetch(() => ({
        status: 400,
        body: { code: "syntax-error", message: "boom", position: 7 },
      })),
    );
    client.token = "t";
    let caught: ApiError | null = null;
    try {
      await client.checkSyntax("SELECT FROM");
    } catch (err) {
      caught = err as ApiError;
    }
    expect(caught).not.toBeNull();
    expect(caught!.status).toBe(400);
    expect(caught!.code).toBe("syntax-error");
    expect(caught!.position).toBe(7);
  });

  it("submits partition counts only when given", async () => {
    const bodies: unknown[] = [];
    const client = new ApiClient(
      "http://x",
      stubFetch((url, init) => {
        bodies.push(JSON.parse(String(init?.body)));
        return { status: 202, body: { job: "j1" } };
      }),
    );
    client.token = "t";
    await client.submitQuery("SELECT 1 FROM t", "quick");
    await client.submitQuery("SELECT 1 FROM t", "long", 4);
    expect(bodies[0]).toEqual({ sql: "SELECT 1 FROM t", queue: "quick" });
    expect(bodies[1]).toEqual({ sql: "SELECT 1 FROM t", queue: "long", partitions: 4 });
  });
});
