/** Entry point: connect to a service, join or create a session, mount the console. */

import { ApiClient } from "./api.js";
import { Console } from "./ui.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? window.location.origin;
  const api = new ApiClient(base);

  let sessionId = params.get("session");
  if (!sessionId) {
    // the service carries defaults when started via `protoal serve`
    const created = await api.createSession({});
    sessionId = created.session_id;
    params.set("session", sessionId);
    window.history.replaceState(null, "", `?${params.toString()}`);
  }

  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const console_ = new Console(api, sessionId, root, document);
  await console_.start();
}

void boot();
