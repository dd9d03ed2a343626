/** Scene to SVG markup (deterministic text output). */

import { Element, Scene } from "./scene.js";

function fmt(v: number): string {
  return Number(v.toFixed(2)).toString();
}

function elementToSvg(e: Element): string {
  switch (e.kind) {
    case "line": {
      const dash = e.dash ? ' stroke-dasharray="6,4"' : "";
      return `<line x1="${fmt(e.x1)}" y1="${fmt(e.y1)}" x2="${fmt(e.x2)}" ` +
        `y2="${fmt(e.y2)}" stroke="${e.color}"${dash}/>`;
    }
    case "marker":
      return `<circle cx="${fmt(e.x)}" cy="${fmt(e.y)}" r="${fmt(e.r)}" ` +
        `fill="${e.color}"/>`;
    case "text":
      return `<text x="${fmt(e.x)}" y="${fmt(e.y)}" font-size="${e.size}" ` +
        `font-family="monospace" fill="${e.color}">${escapeXml(e.text)}</text>`;
  }
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function sceneToSvg(scene: Scene): string {
  const body = scene.elements.map(elementToSvg).join("\n  ");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${scene.width}" ` +
    `height="${scene.height}" viewBox="0 0 ${scene.width} ${scene.height}">\n` +
    `  <rect width="100%" height="100%" fill="#ffffff"/>\n  ${body}\n</svg>\n`;
}
