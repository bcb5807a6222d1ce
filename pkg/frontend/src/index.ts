export * from "./types.js";
export * from "./geometry.js";
export * from "./api.js";
export * from "./state.js";
export * from "./lasso.js";
export * from "./views.js";
