/**
 * Formatting rules for every number the dashboard shows: the service's
 * value rendered at four significant digits, with the non-finite
 * sentinels mapped to symbols. All display paths go through `fmt`, so
 * a rendered value always traces back to a payload field byte for byte.
 */

import type { Serialized } from "./types.js";

export function fmt(value: Serialized | null | undefined): string {
  if (value === null || value === undefined || value === "nan") {
    return "n/a";
  }
  if (value === "inf") {
    return "∞";
  }
  if (value === "-inf") {
    return "-∞";
  }
  return value.toPrecision(4);
}

/** Sentinel strings back to IEEE values, for ordering checks and slider math. */
export function asNumber(value: Serialized): number {
  if (value === "inf") {
    return Infinity;
  }
  if (value === "-inf") {
    return -Infinity;
  }
  if (value === "nan") {
    return NaN;
  }
  return value;
}
