export { Backbone, BACKBONES, backboneOutputDim, type Pooling } from "./backbone.js";
export {
  DEFAULT_MAX_SIDE,
  exportFeatures,
  validateConfig,
  type ExportConfig,
  type ExportSummary,
} from "./export.js";
export { decodeImage, listImages, type DecodedImage } from "./images.js";
export { assignLabels, classOf, LABEL_RULES, type LabelRule } from "./labels.js";
export {
  encodeFeatureStore,
  FEATURE_MAGIC,
  FEATURE_VERSION,
  HEADER_BYTES,
  writeFeatureStore,
  type FeatureRecord,
} from "./simf.js";
