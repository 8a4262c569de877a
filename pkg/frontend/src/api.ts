// Typed client for the discussion service; the console talks to the
// server through this module only.

import type { Message, SessionView, ToolLogEntry } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listKbs(): Promise<string[]> {
    return this.request<{ kbs: string[] }>("/kb").then((r) => r.kbs);
  }

  kbFragment(kb: string, path: string): Promise<unknown> {
    const query = encodeURIComponent(path);
    return this.request<{ value: unknown }>(`/kb/${kb}/query?path=${query}`)
      .then((r) => r.value);
  }

  createSession(kb: string, maxTurns?: number): Promise<SessionView> {
    return this.request<SessionView>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(maxTurns ? { kb, max_turns: maxTurns } : { kb }),
    });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request<SessionView>(`/sessions/${id}`);
  }

  postMessage(id: string, content: string): Promise<Message[]> {
    return this.request<{ messages: Message[] }>(`/sessions/${id}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ content }),
    }).then((r) => r.messages);
  }

  terminateSession(id: string): Promise<SessionView> {
    return this.request<SessionView>(`/sessions/${id}/terminate`, { method: "POST" });
  }

  toolEntry(sessionId: string, digest: string): Promise<ToolLogEntry> {
    return this.request<ToolLogEntry>(`/sessions/${sessionId}/tools/${digest}`);
  }

  /** The export URL; the served file is replayable line-delimited JSON. */
  transcriptUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/transcript`;
  }

  eventsUrl(sessionId: string, since: number): string {
    return `${this.baseUrl}/sessions/${sessionId}/events?since=${since}`;
  }
}
