export type Point = [number, number];

/**
 * Even-odd ray casting, matching the server's region query exactly:
 * vertices and edge points count as inside, and the horizontal-crossing
 * test uses the same half-open rule on y so results agree on boundaries.
 */
export function pointInPolygon(x: number, y: number, polygon: Point[]): boolean {
  let inside = false;
  const n = polygon.length;
  for (let i = 0; i < n; i++) {
    const [x1, y1] = polygon[i];
    const [x2, y2] = polygon[(i + 1) % n];
    if (x1 === x && y1 === y) return true;
    if (y1 > y !== y2 > y) {
      const t = (y - y1) / (y2 - y1);
      const xi = x1 + t * (x2 - x1);
      if (Math.abs(xi - x) < 1e-12) return true;
      if (x < xi) inside = !inside;
    }
  }
  return inside;
}

export function polygonBounds(polygon: Point[]): { x: [number, number]; y: [number, number] } {
  const xs = polygon.map((p) => p[0]);
  const ys = polygon.map((p) => p[1]);
  return {
    x: [Math.min(...xs), Math.max(...xs)],
    y: [Math.min(...ys), Math.max(...ys)],
  };
}
