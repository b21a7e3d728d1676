// Lexical highlighter mirroring the server's token classes. This is not a
// parser: authoritative diagnostics come from the syntax-check endpoint,
// the console only colors token spans.

export type TokenClass =
  | "keyword"
  | "identifier"
  | "number"
  | "string"
  | "operator"
  | "punctuation"
  | "whitespace"
  | "comment";

export interface Token {
  cls: TokenClass;
  text: string;
  start: number;
  end: number;
}

const KEYWORDS = new Set([
  "SELECT", "TOP", "INTO", "FROM", "AS", "INNER", "LEFT", "OUTER", "CROSS",
  "JOIN", "ON", "WHERE", "AND", "OR", "NOT", "IS", "NULL", "TRUE", "FALSE",
  "GROUP", "BY", "HAVING", "ORDER", "ASC", "DESC", "PARTITION", "LIMIT",
]);

const OPERATORS = ["<>", "!=", ">=", "<=", "=", "<", ">", "+", "-", "*", "/", "%"];
const PUNCTUATION = "(),.;:";
const WORD = /^[A-Za-z_][A-Za-z0-9_]*/;
const NUMBER = /^\d+(?:\.\d+)?(?:[eE][+-]?\d+)?/;
const WHITESPACE = /^\s+/;

function scanQuoted(text: string, start: number, close: string): number {
  let pos = start + 1;
  while (pos < text.length) {
    if (text[pos] === close) {
      if (text[pos + 1] === close) {
        pos += 2;
        continue;
      }
      return pos + 1;
    }
    pos += 1;
  }
  return text.length; // unterminated: color to the end, the server reports it
}

export function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  let pos = 0;

  const push = (cls: TokenClass, end: number) => {
    tokens.push({ cls, text: text.slice(pos, end), start: pos, end });
    pos = end;
  };

  while (pos < text.length) {
    const rest = text.slice(pos);
    const ch = text[pos];

    const ws = WHITESPACE.exec(rest);
    if (ws) {
      push("whitespace", pos + ws[0].length);
      continue;
    }
    if (rest.startsWith("--")) {
      const nl = text.indexOf("\n", pos);
      push("comment", nl < 0 ? text.length : nl);
      continue;
    }
    if (rest.startsWith("/*")) {
      const close = text.indexOf("*/", pos + 2);
      push("comment", close < 0 ? text.length : close + 2);
      continue;
    }
    if (ch === "'") {
      push("string", scanQuoted(text, pos, "'"));
      continue;
    }
    if (ch === '"') {
      push("identifier", scanQuoted(text, pos, '"'));
      continue;
    }
    if (ch === "[") {
      push("identifier", scanQuoted(text, pos, "]"));
      continue;
    }
    const num = NUMBER.exec(rest);
    if (num && /\d/.test(ch)) {
      push("number", pos + num[0].length);
      continue;
    }
    const word = WORD.exec(rest);
    if (word) {
      push(KEYWORDS.has(word[0].toUpperCase()) ? "keyword" : "identifier",
           pos + word[0].length);
      continue;
    }
    const op = OPERATORS.find((o) => rest.startsWith(o));
    if (op) {
      push("operator", pos + op.length);
      continue;
    }
    if (PUNCTUATION.includes(ch)) {
      push("punctuation", pos + 1);
      continue;
    }
    push("identifier", pos + 1); // unknown byte: neutral coloring
  }
  return tokens;
}

export function highlightHtml(text: string): string {
  const escape = (s: string) =>
    s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
  return tokenize(text)
    .map((t) =>
      t.cls === "whitespace"
        ? escape(t.text)
        : `<span class="tok-${t.cls}">${escape(t.text)}</span>`,
    )
    .join("");
}
