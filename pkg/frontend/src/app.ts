/**
 * Browser shell: wires the feed client, reducer, and renderer to the DOM.
 *
 * The feed endpoint comes from the `?feed=` query parameter (default: same
 * origin). All logic lives in the pure modules; this file only owns the DOM.
 */

import { FeedClient } from "./client.js";
import { toggleSegmentMode } from "./commands.js";
import { buildViewModel, renderHtml } from "./render.js";
import { initialViewState, reduce, type ViewAction, type ViewState } from "./state.js";

function endpointFromLocation(): string {
  const param = new URLSearchParams(window.location.search).get("feed");
  return (param ?? window.location.origin).replace(/\/+$/, "");
}

export function mountDashboard(root: HTMLElement, endpoint?: string): FeedClient {
  const baseUrl = endpoint ?? endpointFromLocation();
  let state: ViewState = initialViewState;

  const view = document.createElement("div");
  const controls = document.createElement("div");
  controls.className = "controls";
  root.replaceChildren(view, controls);

  const render = () => {
    view.innerHTML = renderHtml(buildViewModel(state));
  };
  const dispatch = (action: ViewAction) => {
    state = reduce(state, action);
    render();
  };

  const addButton = (label: string, mode: string, slice?: number) => {
    const button = document.createElement("button");
    button.textContent = label;
    button.addEventListener("click", () => {
      void toggleSegmentMode(baseUrl, dispatch, mode, slice);
    });
    controls.appendChild(button);
  };
  addButton("automatic", "automatic");
  addButton("manual 3 min", "manual", 3);
  addButton("manual 5 min", "manual", 5);
  addButton("manual 15 min", "manual", 15);

  render();
  const client = new FeedClient(baseUrl, dispatch);
  client.start();
  return client;
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root !== null) mountDashboard(root);
}
