import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl =
  params.get("service") ??
  window.localStorage.getItem("askdb.baseUrl") ??
  "http://127.0.0.1:8765";
const token = params.get("token") ?? window.localStorage.getItem("askdb.token") ?? "";

window.localStorage.setItem("askdb.baseUrl", baseUrl);
if (token) window.localStorage.setItem("askdb.token", token);

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");
createApp(root, { baseUrl, token });
