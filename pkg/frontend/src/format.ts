// Displayed precision lives in exactly one place so the end-to-end test can
// hold rendered text against API payloads.

export const DISPLAY_DIGITS = 4;

export function fmt(value: number | null | undefined): string {
  if (value === null || value === undefined) {
    return "–";
  }
  if (!isFinite(value)) {
    return "–";
  }
  if (value === 0) {
    return "0";
  }
  const magnitude = Math.abs(value);
  if (magnitude >= 1e5 || magnitude < 1e-3) {
    return value.toExponential(DISPLAY_DIGITS - 1);
  }
  return String(Number(value.toPrecision(DISPLAY_DIGITS)));
}

export function fmtValue(value: number | string | null | undefined): string {
  if (typeof value === "string") {
    return value;
  }
  return fmt(value);
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
