// Shapes mirror the analytics API responses field for field.

export type EventType = "crash" | "pothole";

export interface EventRecord {
  event_id: number;
  received_at: number;
  v: number;
  seq: number;
  driver_id: string;
  type: EventType;
  t: number;
  lat: number;
  lon: number;
  speed_kmh: number;
  max_axis: "x" | "y" | "z";
  g_force: number;
  magnitude_pct: number;
  collision: string | null;
  flagged_unknown_driver: boolean;
}

export interface DriverRecord {
  driver_id: string;
  name: string;
  car: string;
  plate: string;
  emergency_contact_name: string;
  emergency_contact_phone: string;
}

export interface NotificationRecord {
  notif_id: number;
  event_id: number;
  kind: "voice_911" | "voice_contact" | "sms_contact";
  to: string;
  message: string;
  status: "pending" | "sent" | "failed";
  attempts: number;
  last_attempt_at: number | null;
  reason: string | null;
}

export interface SpeedRow {
  event_id: number;
  t: number;
  speed_kmh: number;
}

export interface SpeedStats {
  count: number;
  mean: number | null;
  max: number | null;
  rows: SpeedRow[];
}

export interface BucketCount {
  bucket_start: number;
  crashes: number;
  potholes: number;
}

export type Bucket = "hour" | "day" | "week";

export interface ApiErrorBody {
  status: number;
  code: string;
  detail: string;
}
