/** Screen-space picking: project points with a column-major 4x4 matrix and
 * select by rectangle or brush circle. Pure math so it is testable without
 * WebGL; the viewer feeds it the camera's view-projection matrix. */

export type Mat4 = ArrayLike<number>; // column-major, like three.js elements

export type Rect = { x0: number; y0: number; x1: number; y1: number };

/** Project (N,3) flat positions to pixel coordinates. Output is a flat
 * (N,3) array of x_px, y_px, ndc_depth; points behind the camera get NaN. */
export function projectPoints(
  positions: ArrayLike<number>,
  viewProjection: Mat4,
  width: number,
  height: number,
): Float32Array {
  const n = Math.floor(positions.length / 3);
  const m = viewProjection;
  const out = new Float32Array(n * 3);
  for (let i = 0; i < n; i++) {
    const x = positions[3 * i];
    const y = positions[3 * i + 1];
    const z = positions[3 * i + 2];
    const cx = m[0] * x + m[4] * y + m[8] * z + m[12];
    const cy = m[1] * x + m[5] * y + m[9] * z + m[13];
    const cz = m[2] * x + m[6] * y + m[10] * z + m[14];
    const cw = m[3] * x + m[7] * y + m[11] * z + m[15];
    if (cw <= 0) {
      out[3 * i] = NaN;
      out[3 * i + 1] = NaN;
      out[3 * i + 2] = NaN;
      continue;
    }
    out[3 * i] = ((cx / cw + 1) / 2) * width;
    out[3 * i + 1] = ((1 - cy / cw) / 2) * height;
    out[3 * i + 2] = cz / cw;
  }
  return out;
}

/** Indices of projected points inside a screen rectangle (any corner order). */
export function pickInRect(screen: Float32Array, rect: Rect): number[] {
  const xMin = Math.min(rect.x0, rect.x1);
  const xMax = Math.max(rect.x0, rect.x1);
  const yMin = Math.min(rect.y0, rect.y1);
  const yMax = Math.max(rect.y0, rect.y1);
  const picked: number[] = [];
  for (let i = 0; i < screen.length / 3; i++) {
    const x = screen[3 * i];
    const y = screen[3 * i + 1];
    if (Number.isNaN(x)) continue;
    if (x >= xMin && x <= xMax && y >= yMin && y <= yMax) picked.push(i);
  }
  return picked;
}

/** Indices of projected points within a brush circle in pixels. */
export function pickBrush(
  screen: Float32Array,
  cx: number,
  cy: number,
  radius: number,
): number[] {
  const r2 = radius * radius;
  const picked: number[] = [];
  for (let i = 0; i < screen.length / 3; i++) {
    const dx = screen[3 * i] - cx;
    const dy = screen[3 * i + 1] - cy;
    if (Number.isNaN(dx)) continue;
    if (dx * dx + dy * dy <= r2) picked.push(i);
  }
  return picked;
}

// --- minimal column-major mat4 helpers (tests and headless picking) --------

export function mat4Multiply(a: Mat4, b: Mat4): Float32Array {
  const out = new Float32Array(16);
  for (let col = 0; col < 4; col++) {
    for (let row = 0; row < 4; row++) {
      let sum = 0;
      for (let k = 0; k < 4; k++) sum += a[k * 4 + row] * b[col * 4 + k];
      out[col * 4 + row] = sum;
    }
  }
  return out;
}

export function perspectiveMatrix(
  fovYRadians: number,
  aspect: number,
  near: number,
  far: number,
): Float32Array {
  const f = 1 / Math.tan(fovYRadians / 2);
  const out = new Float32Array(16);
  out[0] = f / aspect;
  out[5] = f;
  out[10] = (far + near) / (near - far);
  out[11] = -1;
  out[14] = (2 * far * near) / (near - far);
  return out;
}

export function lookAtMatrix(
  eye: [number, number, number],
  center: [number, number, number],
  up: [number, number, number] = [0, 1, 0],
): Float32Array {
  const sub = (a: number[], b: number[]) => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
  const cross = (a: number[], b: number[]) => [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
  const norm = (a: number[]) => {
    const l = Math.hypot(a[0], a[1], a[2]);
    return [a[0] / l, a[1] / l, a[2] / l];
  };
  const z = norm(sub([...eye], [...center]));
  const x = norm(cross([...up], z));
  const y = cross(z, x);
  const out = new Float32Array(16);
  out[0] = x[0]; out[4] = x[1]; out[8] = x[2];
  out[1] = y[0]; out[5] = y[1]; out[9] = y[2];
  out[2] = z[0]; out[6] = z[1]; out[10] = z[2];
  out[12] = -(x[0] * eye[0] + x[1] * eye[1] + x[2] * eye[2]);
  out[13] = -(y[0] * eye[0] + y[1] * eye[1] + y[2] * eye[2]);
  out[14] = -(z[0] * eye[0] + z[1] * eye[1] + z[2] * eye[2]);
  out[15] = 1;
  return out;
}
