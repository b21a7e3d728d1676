// Browser entry point: the console talks to the API that served it.

import { ApiClient } from "./api.js";
import { ConsoleApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = new ConsoleApp(root, new ApiClient(""));
  app.mount();
  (window as unknown as { gwConsole: ConsoleApp }).gwConsole = app;
}
