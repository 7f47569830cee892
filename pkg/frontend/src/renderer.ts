/**
 * WebGL2 point cloud renderer.
 *
 * The wire cloud payload is already GPU-shaped: 16-byte records with
 * 3 x f32 position then 3 x u8 color and one pad byte.  Upload is a
 * single bufferData of the raw bytes and draw is a single gl.POINTS
 * call, which is what keeps 100k points comfortably above 30 FPS.
 */

import { POINT_STRIDE } from "./protocol.js";

const VERT = `#version 300 es
layout(location=0) in vec3 aPos;
layout(location=1) in vec3 aColor;
uniform mat4 uViewProj;
out vec3 vColor;
void main() {
  gl_Position = uViewProj * vec4(aPos, 1.0);
  gl_PointSize = clamp(6.0 / max(gl_Position.w, 0.05), 1.5, 7.0);
  vColor = aColor;
}`;

const FRAG = `#version 300 es
precision mediump float;
in vec3 vColor;
out vec4 frag;
void main() { frag = vec4(vColor, 1.0); }`;

function compile(gl: WebGL2RenderingContext, type: number, src: string): WebGLShader {
  const sh = gl.createShader(type);
  if (sh === null) throw new Error("createShader failed");
  gl.shaderSource(sh, src);
  gl.compileShader(sh);
  if (!gl.getShaderParameter(sh, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(sh) ?? "?"}`);
  }
  return sh;
}

export class CloudRenderer {
  private readonly program: WebGLProgram;
  private readonly vao: WebGLVertexArrayObject;
  private readonly vbo: WebGLBuffer;
  private readonly uViewProj: WebGLUniformLocation;
  private count = 0;

  constructor(private readonly gl: WebGL2RenderingContext) {
    const program = gl.createProgram();
    if (program === null) throw new Error("createProgram failed");
    gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, VERT));
    gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, FRAG));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(`program link failed: ${gl.getProgramInfoLog(program) ?? "?"}`);
    }
    this.program = program;
    const loc = gl.getUniformLocation(program, "uViewProj");
    if (loc === null) throw new Error("uViewProj uniform missing");
    this.uViewProj = loc;

    const vao = gl.createVertexArray();
    const vbo = gl.createBuffer();
    if (vao === null || vbo === null) throw new Error("buffer allocation failed");
    this.vao = vao;
    this.vbo = vbo;
    gl.bindVertexArray(vao);
    gl.bindBuffer(gl.ARRAY_BUFFER, vbo);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, POINT_STRIDE, 0);
    gl.enableVertexAttribArray(1);
    gl.vertexAttribPointer(1, 3, gl.UNSIGNED_BYTE, true, POINT_STRIDE, 12);
    gl.bindVertexArray(null);

    gl.enable(gl.DEPTH_TEST);
    gl.clearColor(0.05, 0.06, 0.08, 1.0);
  }

  /** Replace the cloud with the raw interleaved wire bytes. */
  upload(points: Uint8Array, count: number): void {
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.vbo);
    gl.bufferData(gl.ARRAY_BUFFER, points, gl.DYNAMIC_DRAW);
    this.count = count;
  }

  draw(viewProj: Float32Array): void {
    const gl = this.gl;
    gl.viewport(0, 0, gl.drawingBufferWidth, gl.drawingBufferHeight);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (this.count === 0) return;
    gl.useProgram(this.program);
    gl.uniformMatrix4fv(this.uViewProj, false, viewProj);
    gl.bindVertexArray(this.vao);
    gl.drawArrays(gl.POINTS, 0, this.count);
    gl.bindVertexArray(null);
  }
}

/** Direct mode: draw the robot camera PNG onto a 2D canvas. */
export class FrameBlitter {
  private pending = false;

  constructor(private readonly ctx: CanvasRenderingContext2D) {}

  show(png: Uint8Array, width: number, height: number): void {
    if (this.pending) return; // drop frames rather than queue decodes
    this.pending = true;
    const copy = new Uint8Array(png); // detach from the message buffer
    const blob = new Blob([copy.buffer as ArrayBuffer], { type: "image/png" });
    createImageBitmap(blob)
      .then((bmp) => {
        const canvas = this.ctx.canvas;
        this.ctx.imageSmoothingEnabled = false;
        this.ctx.clearRect(0, 0, canvas.width, canvas.height);
        this.ctx.drawImage(bmp, 0, 0, width, height, 0, 0, canvas.width, canvas.height);
        bmp.close();
      })
      .catch(() => {
        // a torn PNG is not worth crashing the cockpit over
      })
      .finally(() => {
        this.pending = false;
      });
  }
}
