// Loads the API snapshots shared with the server's test suite so UI
// tests can only ever display numbers the server actually produced.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const GOLDEN = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "tests", "golden");

export function golden<T>(name: string): T {
  return JSON.parse(readFileSync(join(GOLDEN, name), "utf-8")) as T;
}

// every numeric literal appearing anywhere in a JSON payload
export function numbersIn(value: unknown, out = new Set<number>()): Set<number> {
  if (typeof value === "number") out.add(value);
  else if (Array.isArray(value)) value.forEach((v) => numbersIn(v, out));
  else if (value && typeof value === "object")
    Object.values(value).forEach((v) => numbersIn(v, out));
  return out;
}
