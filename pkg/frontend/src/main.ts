/**
 * Bootstrap: read connection parameters from the URL, build the client,
 * and mount the console.
 *
 *   console.html?api=http://127.0.0.1:8700&session=s…&token=official-…
 *
 * The role is inferred from the token prefix the service issued; the
 * service enforces it regardless of what the client claims.
 */

import { ApiClient } from "./api";
import { AuditConsole } from "./console";

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const api = params.get("api") ?? window.location.origin;
  const sessionId = params.get("session") ?? "";
  const token = params.get("token") ?? "";
  const operator = params.get("operator") ?? "console-operator";

  const root = document.getElementById("console-root");
  if (!root) throw new Error("missing #console-root mount point");

  if (!sessionId || !token) {
    root.textContent =
      "Missing ?session= and ?token= query parameters; get both from " +
      "whoever created the audit session.";
    return;
  }

  const consoleApp = new AuditConsole({
    root,
    client: new ApiClient({ baseUrl: api, token }),
    sessionId,
    role: token.startsWith("scrutineer-") ? "scrutineer" : "official",
    operator,
  });
  void consoleApp.connect();

  const refresh = document.getElementById("refresh-button");
  refresh?.addEventListener("click", () => {
    void consoleApp.refreshSelections();
    void consoleApp.refreshStats();
  });
}

main();
