import { describe, expect, it } from "vitest";
import { ApiError, Client } from "../src/api";
import { LabelQueue } from "../src/queue";

type Responder = (url: string, init?: RequestInit) => Response | Promise<Response>;

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function fakeClient(responder: Responder): { client: Client; calls: string[] } {
  const calls: string[] = [];
  const fetchFn = (async (input: URL | RequestInfo, init?: RequestInit) => {
    const url = String(input);
    calls.push(url);
    return responder(url, init);
  }) as typeof fetch;
  return { client: new Client("http://svc", fetchFn), calls };
}

const ok = (id: string) => jsonResponse(200, { id, label: "good", round: 1, pending: 0 });

describe("LabelQueue", () => {
  it("labels scenes in order and finishes", async () => {
    const { client, calls } = fakeClient((url) => ok(url.split("/")[4]));
    const q = new LabelQueue(client, ["a", "b", "c"]);
    expect(q.total).toBe(3);
    expect(q.current()).toBe("a");

    for (const label of ["good", "medium", "bad"] as const) {
      const res = await q.label(label);
      expect(res?.outcome).toBe("labeled");
    }
    expect(q.done).toBe(true);
    expect(q.current()).toBeNull();
    expect(q.stateOf("b")).toBe("labeled");
    expect(calls).toEqual([
      "http://svc/scenes/a/label",
      "http://svc/scenes/b/label",
      "http://svc/scenes/c/label",
    ]);
  });

  it("drops repeat presses while the current scene is resolving", async () => {
    let release!: (r: Response) => void;
    const gate = new Promise<Response>((r) => (release = r));
    const { client, calls } = fakeClient(() => gate);
    const q = new LabelQueue(client, ["a"]);

    const first = q.label("good");
    // the card is mid-flight: these must not produce a second request
    expect(await q.label("bad")).toBeNull();
    expect(await q.label("good")).toBeNull();
    expect(q.stateOf("a")).toBe("submitting");

    release(ok("a"));
    const res = await first;
    expect(res?.outcome).toBe("labeled");
    expect(calls).toHaveLength(1);
    expect(await q.label("good")).toBeNull();   // already labeled, still one request
    expect(calls).toHaveLength(1);
  });

  it("treats a 409 as labeled elsewhere and moves on", async () => {
    const { client } = fakeClient((url) =>
      url.includes("/scenes/a/")
        ? jsonResponse(409, { code: "already_labeled", message: "scene a is already labeled" })
        : ok("b"),
    );
    const q = new LabelQueue(client, ["a", "b"]);

    const res = await q.label("good");
    expect(res?.outcome).toBe("labeled-elsewhere");
    expect(q.stateOf("a")).toBe("labeled-elsewhere");
    expect(q.current()).toBe("b");

    expect((await q.label("good"))?.outcome).toBe("labeled");
    expect(q.done).toBe(true);
  });

  it("retries network failures with backoff and keeps the position", async () => {
    let failures = 2;
    const { client, calls } = fakeClient(() => {
      if (failures > 0) {
        failures -= 1;
        throw new TypeError("fetch failed");
      }
      return ok("a");
    });
    const slept: number[] = [];
    const q = new LabelQueue(client, ["a", "b"], {
      backoffMs: 100,
      sleep: async (ms) => { slept.push(ms); },
    });

    const res = await q.label("good");
    expect(res?.outcome).toBe("labeled");
    expect(slept).toEqual([100, 200]);   // exponential backoff
    expect(calls).toHaveLength(3);
    expect(q.current()).toBe("b");       // advanced only after success
  });

  it("gives up after max retries but keeps the card current for retry", async () => {
    let reachable = false;
    const { client } = fakeClient(() => {
      if (!reachable) throw new TypeError("fetch failed");
      return ok("a");
    });
    const q = new LabelQueue(client, ["a", "b"], {
      maxRetries: 2,
      backoffMs: 1,
      sleep: async () => {},
    });

    const res = await q.label("good");
    expect(res?.outcome).toBe("failed");
    expect(res?.error).toMatch(/fetch failed/);
    expect(q.stateOf("a")).toBe("failed");
    expect(q.current()).toBe("a");       // position preserved
    expect(q.done).toBe(false);

    reachable = true;                    // service comes back
    expect((await q.label("good"))?.outcome).toBe("labeled");
    expect(q.current()).toBe("b");
  });

  it("does not retry a definite service refusal", async () => {
    const { client, calls } = fakeClient(() =>
      jsonResponse(422, { code: "validation_error", message: "label must be good, medium, or bad" }),
    );
    const q = new LabelQueue(client, ["a"]);

    const res = await q.label("good");
    expect(res?.outcome).toBe("failed");
    expect(res?.error).toMatch(/good, medium, or bad/);
    expect(calls).toHaveLength(1);       // no retry loop on a 4xx
    expect(q.current()).toBe("a");
  });

  it("serializes submissions after a failure", async () => {
    const starts: string[] = [];
    let release!: () => void;
    const gate = new Promise<void>((r) => (release = r));
    const { client } = fakeClient(async (url) => {
      starts.push(url);
      if (starts.length === 1) {
        await gate;
        throw new TypeError("fetch failed");
      }
      return ok("x");
    });
    const q = new LabelQueue(client, ["a", "b"], {
      maxRetries: 0,
      sleep: async () => {},
    });

    const first = q.label("good");
    const blockedRetry = new Promise<void>((resolve) => {
      // queued behind the in-flight failure; must start only after it settles
      void first.then(async () => {
        await q.label("medium");
        resolve();
      });
    });
    await new Promise<void>((r) => setTimeout(r, 0));
    expect(starts).toHaveLength(1);
    release();
    await first;
    await blockedRetry;
    expect(starts).toHaveLength(2);
    expect(q.stateOf("a")).toBe("labeled");
  });
});

describe("Client error mapping", () => {
  it("surfaces the service {code, message} body", async () => {
    const { client } = fakeClient(() =>
      jsonResponse(409, { code: "wrong_round", message: "round 1 is closed" }),
    );
    const err = await client.sampleBatch(1, 4).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe("wrong_round");
    expect(err.message).toBe("round 1 is closed");
  });

  it("falls back to a generic code on a non-JSON body", async () => {
    const { client } = fakeClient(() => new Response("boom", { status: 502 }));
    const err = await client.params().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("http_error");
  });
});
