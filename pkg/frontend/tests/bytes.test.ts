import { describe, expect, it } from "vitest";

import { byteSpanToCharRange, segmentValue } from "../src/bytes.js";

const encoder = new TextEncoder();

function byteSpanOf(value: string, needle: string): [number, number] {
  const charStart = value.indexOf(needle);
  const start = encoder.encode(value.slice(0, charStart)).length;
  return [start, start + encoder.encode(needle).length];
}

describe("byteSpanToCharRange", () => {
  it("maps ascii spans 1:1", () => {
    expect(byteSpanToCharRange("hello world", [6, 11])).toEqual([6, 11]);
  });

  it("maps spans after multibyte characters", () => {
    const value = "héllo ☀️ mail bob@x.example end";
    const span = byteSpanOf(value, "bob@x.example");
    const [start, end] = byteSpanToCharRange(value, span);
    expect(value.slice(start, end)).toBe("bob@x.example");
  });

  it("handles astral characters (surrogate pairs)", () => {
    const value = "call 👍👍 +1-555-013-4477 now";
    const span = byteSpanOf(value, "+1-555-013-4477");
    const [start, end] = byteSpanToCharRange(value, span);
    expect(value.slice(start, end)).toBe("+1-555-013-4477");
  });

  it("clamps out-of-range spans instead of distorting text", () => {
    const value = "short";
    expect(byteSpanToCharRange(value, [2, 999])).toEqual([2, 5]);
    expect(byteSpanToCharRange(value, [999, 1000])).toEqual([5, 5]);
  });
});

describe("segmentValue", () => {
  it("splits around one span", () => {
    const value = "mail me at a@b.example soon";
    const span = byteSpanOf(value, "a@b.example");
    expect(segmentValue(value, [{ span, kind: "email" }])).toEqual([
      { text: "mail me at ", kind: null },
      { text: "a@b.example", kind: "email" },
      { text: " soon", kind: null },
    ]);
  });

  it("handles multiple ordered spans", () => {
    const value = "a@b.example or +1-555-013-4477";
    const segments = segmentValue(value, [
      { span: byteSpanOf(value, "+1-555-013-4477"), kind: "phone" },
      { span: byteSpanOf(value, "a@b.example"), kind: "email" },
    ]);
    expect(segments.map((s) => s.kind)).toEqual(["email", null, "phone"]);
    expect(segments.map((s) => s.text).join("")).toBe(value);
  });

  it("returns the whole value as one segment without spans", () => {
    expect(segmentValue("plain", [])).toEqual([{ text: "plain", kind: null }]);
  });

  it("never loses characters even with overlapping spans", () => {
    const value = "abcdefgh";
    const segments = segmentValue(value, [
      { span: [0, 4], kind: "a" },
      { span: [2, 6], kind: "b" },
    ]);
    expect(segments.map((s) => s.text).join("")).toBe(value);
  });
});
