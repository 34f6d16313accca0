import { ApiClient } from "./api.js";
import { App } from "./app.js";

/**
 * Browser bootstrap: the annotator id comes from ?annotator=... (then
 * sticks in localStorage so reloads resume), the session from ?session=...
 * (default "session"), and the service is assumed same-origin.
 */
function annotatorId(): string {
  const params = new URLSearchParams(window.location.search);
  const fromQuery = params.get("annotator");
  if (fromQuery) {
    window.localStorage.setItem("annotator", fromQuery);
    return fromQuery;
  }
  const stored = window.localStorage.getItem("annotator");
  if (stored) return stored;
  const generated = `anon-${Math.random().toString(36).slice(2, 8)}`;
  window.localStorage.setItem("annotator", generated);
  return generated;
}

function sessionId(): string {
  return new URLSearchParams(window.location.search).get("session") ?? "session";
}

const root = document.getElementById("app");
if (root) {
  const api = new ApiClient("", sessionId());
  void new App(root, api, annotatorId()).start();
}
