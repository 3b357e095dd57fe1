/** three.js point renderer: target / reconstruction / edited overlays with
 * orbit controls, correspondence coloring and selection highlighting. */

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";

import type { CloudPayload } from "./api";
import type { ColorMode, Overlay } from "./state";
import { projectPoints } from "./picking";

const SOLID_COLORS: Record<Overlay, [number, number, number]> = {
  target: [0.55, 0.55, 0.58],
  recon: [0.25, 0.55, 0.95],
  edited: [0.95, 0.55, 0.2],
};

const HIGHLIGHT: [number, number, number] = [1.0, 0.95, 0.2];

type Entry = {
  points: THREE.Points;
  positions: Float32Array;
  serverColors: Float32Array | null;
};

export class Viewer {
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private controls: OrbitControls;
  private entries = new Map<Overlay, Entry>();
  private colorMode: ColorMode = "correspondence";
  private selection: number[] = [];

  constructor(private canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(45, 1, 0.01, 100);
    this.camera.position.set(2.0, 1.4, 2.4);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.enableDamping = true;
    this.scene.background = new THREE.Color(0x14161a);
    const animate = () => {
      requestAnimationFrame(animate);
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    };
    animate();
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  setCloud(which: Overlay, payload: CloudPayload | undefined): void {
    const existing = this.entries.get(which);
    if (existing) {
      this.scene.remove(existing.points);
      existing.points.geometry.dispose();
      (existing.points.material as THREE.Material).dispose();
      this.entries.delete(which);
    }
    if (!payload) return;
    const n = payload.points.length;
    const positions = new Float32Array(n * 3);
    for (let i = 0; i < n; i++) {
      positions[3 * i] = payload.points[i][0];
      positions[3 * i + 1] = payload.points[i][1];
      positions[3 * i + 2] = payload.points[i][2];
    }
    let serverColors: Float32Array | null = null;
    if (payload.colors) {
      serverColors = new Float32Array(n * 3);
      for (let i = 0; i < n; i++) {
        serverColors[3 * i] = payload.colors[i][0];
        serverColors[3 * i + 1] = payload.colors[i][1];
        serverColors[3 * i + 2] = payload.colors[i][2];
      }
    }
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    geometry.setAttribute(
      "color",
      new THREE.BufferAttribute(new Float32Array(n * 3), 3),
    );
    const material = new THREE.PointsMaterial({
      size: 0.035,
      vertexColors: true,
      sizeAttenuation: true,
    });
    const points = new THREE.Points(geometry, material);
    this.scene.add(points);
    this.entries.set(which, { points, positions, serverColors });
    this.repaint(which);
  }

  setVisible(which: Overlay, visible: boolean): void {
    const entry = this.entries.get(which);
    if (entry) entry.points.visible = visible;
  }

  setColorMode(mode: ColorMode): void {
    this.colorMode = mode;
    for (const which of this.entries.keys()) this.repaint(which);
  }

  setSelection(indices: number[]): void {
    this.selection = indices;
    this.repaint("recon");
    this.repaint("edited");
  }

  /** Pixel-space projection of an overlay's points for picking. */
  screenPoints(which: Overlay): Float32Array | null {
    const entry = this.entries.get(which);
    if (!entry) return null;
    this.camera.updateMatrixWorld();
    const vp = new THREE.Matrix4().multiplyMatrices(
      this.camera.projectionMatrix,
      this.camera.matrixWorldInverse,
    );
    return projectPoints(
      entry.positions,
      vp.elements,
      this.canvas.clientWidth,
      this.canvas.clientHeight,
    );
  }

  private repaint(which: Overlay): void {
    const entry = this.entries.get(which);
    if (!entry) return;
    const attr = entry.points.geometry.getAttribute("color") as THREE.BufferAttribute;
    const colors = attr.array as Float32Array;
    const n = colors.length / 3;
    const solid = SOLID_COLORS[which];
    for (let i = 0; i < n; i++) {
      const source =
        this.colorMode === "correspondence" && entry.serverColors
          ? [
              entry.serverColors[3 * i],
              entry.serverColors[3 * i + 1],
              entry.serverColors[3 * i + 2],
            ]
          : solid;
      colors[3 * i] = source[0];
      colors[3 * i + 1] = source[1];
      colors[3 * i + 2] = source[2];
    }
    if (which !== "target") {
      for (const index of this.selection) {
        if (index < n) {
          colors[3 * index] = HIGHLIGHT[0];
          colors[3 * index + 1] = HIGHLIGHT[1];
          colors[3 * index + 2] = HIGHLIGHT[2];
        }
      }
    }
    attr.needsUpdate = true;
  }
}
