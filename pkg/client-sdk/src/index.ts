export {
  Envelope,
  FrameSplitter,
  JsonValue,
  MAX_FRAME,
  MAX_TOPIC_BYTES,
  MalformedJson,
  Op,
  OversizeFrame,
  ProtocolError,
  UnknownOp,
  decodeBody,
  decodeFrame,
  encodeFrame,
  validateEnvelope,
} from "./envelope.js";
export { Client, ConnectionLost, Topic } from "./client.js";
export {
  Command,
  DEFAULT_SAFETY,
  PEDESTRIAN_V_CAP,
  RecoveryAction,
  RecoveryController,
  SafetyConfig,
  forwardClearance,
  mustStop,
  slowdownFilter,
} from "./safety.js";
export {
  CollisionMsg,
  ImageMsg,
  LidarMsg,
  PoseMsg,
  STANDARD_TOPICS,
  ScanMsg,
  SEMANTIC_PEDESTRIAN,
  TwistMsg,
  downsampleThree,
  pedestrianPixels,
} from "./topics.js";
export {
  AgentConfig,
  AgentResult,
  PauseCycle,
  Rect,
  TimedPose,
  heuristicPolicy,
  referenceAgent,
} from "./agent.js";
