// Wire shapes mirrored from the discussion service API.

export interface ToolCall {
  tool: string;
  args: Record<string, unknown>;
  digest: string;
}

export interface Message {
  seq: number;
  speaker: string;
  content: string;
  tool_calls: ToolCall[];
  ts: string;
}

export interface RoleView {
  name: string;
  kind: string;
  tools: string[];
}

export interface SessionView {
  id: string;
  roles: RoleView[];
  state: "open" | "terminated";
  max_turns: number;
  n_messages: number;
  kb: string | null;
  messages?: Message[];
}

export interface ToolLogEntry {
  digest: string;
  tool: string;
  args: Record<string, unknown>;
  result: unknown;
}
