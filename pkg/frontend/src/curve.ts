/**
 * Learning-curve view: a straight pass-through of GET /metrics.
 *
 * The points are exactly the service's numbers; the only math here is the
 * affine map from data coordinates to SVG pixels.
 */

import type { MetricsResponse } from "./api.js";

export interface CurvePoint {
  round: number;
  labeled: number;
  accuracy: number | null;
}

export interface CurveView {
  phase: string;
  labeled: number;
  points: CurvePoint[];
}

export function toCurveView(metrics: MetricsResponse): CurveView {
  return {
    phase: metrics.phase,
    labeled: metrics.labeled,
    points: metrics.rounds.map((record) => ({
      round: record.round,
      labeled: record.labeled,
      accuracy: record.accuracy,
    })),
  };
}

/** Polyline path for the accuracy points, margins included. */
export function curvePath(
  view: CurveView,
  width: number,
  height: number,
  pad = 24,
): string {
  const points = view.points.filter((p) => p.accuracy !== null);
  if (points.length === 0) {
    return "";
  }
  const xs = points.map((p) => p.labeled);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const spanX = xMax - xMin || 1;
  const toX = (labeled: number) =>
    pad + ((labeled - xMin) / spanX) * (width - 2 * pad);
  const toY = (accuracy: number) => height - pad - accuracy * (height - 2 * pad);
  return points
    .map(
      (p, i) =>
        `${i === 0 ? "M" : "L"}${toX(p.labeled).toFixed(1)},${toY(
          p.accuracy as number,
        ).toFixed(1)}`,
    )
    .join(" ");
}
