//! Domain vocabulary shared by every stage: sensor frame layout, the joint
//! taxonomy, body-part grouping, task labels and the time-series container.
//!
//! Sensor frames are 82 values wide:
//!
//! ```text
//! [ L.pressure(35) | L.gyro(3) | L.accel(3) | R.pressure(35) | R.gyro(3) | R.accel(3) ]
//! ```
//!
//! Skeleton frames are 21 joints x (x, y, z) in millimetres, joints in
//! [`JointId::ALL`] order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRESSURE_CHANNELS: usize = 35;
pub const GYRO_CHANNELS: usize = 3;
pub const ACCEL_CHANNELS: usize = 3;
/// Channels recorded per foot: pressure, gyro, accel.
pub const FOOT_WIDTH: usize = PRESSURE_CHANNELS + GYRO_CHANNELS + ACCEL_CHANNELS;
/// Channels in a merged two-foot frame.
pub const FRAME_WIDTH: usize = 2 * FOOT_WIDTH;
pub const JOINT_COUNT: usize = 21;
/// Scalars in one skeleton frame.
pub const SKELETON_WIDTH: usize = JOINT_COUNT * 3;

/// Seconds since recording start.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Timestamp(f64);

impl Timestamp {
    pub fn new(seconds: f64) -> Result<Self> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(Error::Parameter(format!(
                "timestamp must be finite and non-negative, got {seconds}"
            )));
        }
        Ok(Timestamp(seconds))
    }

    pub fn seconds(self) -> f64 {
        self.0
    }
}

/// Time of grid point `k` for a grid with the given period.
///
/// All grid timestamps in the crate are produced by this function so that
/// "on the grid" is an exact floating-point comparison.
pub fn grid_time(k: i64, period: f64) -> f64 {
    k as f64 * period
}

/// Nearest grid index of `t`, if `t` lies on the grid within `1e-9` periods.
pub fn grid_index(t: f64, period: f64) -> Option<i64> {
    let k = (t / period).round();
    if ((t / period) - k).abs() < 1e-9 {
        Some(k as i64)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FootSide {
    Left,
    Right,
}

impl FootSide {
    pub const BOTH: [FootSide; 2] = [FootSide::Left, FootSide::Right];

    fn offset(self) -> usize {
        match self {
            FootSide::Left => 0,
            FootSide::Right => FOOT_WIDTH,
        }
    }
}

/// A channel within one foot's block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Pressure(usize),
    Gyro(usize),
    Accel(usize),
}

impl Channel {
    /// Offset of this channel inside a 41-wide single-foot record.
    pub fn foot_offset(self) -> Result<usize> {
        match self {
            Channel::Pressure(i) if i < PRESSURE_CHANNELS => Ok(i),
            Channel::Gyro(i) if i < GYRO_CHANNELS => Ok(PRESSURE_CHANNELS + i),
            Channel::Accel(i) if i < ACCEL_CHANNELS => Ok(PRESSURE_CHANNELS + GYRO_CHANNELS + i),
            other => Err(Error::Layout(format!("channel {other:?} out of range"))),
        }
    }

    /// Inverse of [`Channel::foot_offset`].
    pub fn from_foot_offset(offset: usize) -> Result<Channel> {
        match offset {
            o if o < PRESSURE_CHANNELS => Ok(Channel::Pressure(o)),
            o if o < PRESSURE_CHANNELS + GYRO_CHANNELS => Ok(Channel::Gyro(o - PRESSURE_CHANNELS)),
            o if o < FOOT_WIDTH => Ok(Channel::Accel(o - PRESSURE_CHANNELS - GYRO_CHANNELS)),
            o => Err(Error::Layout(format!("foot offset {o} out of range 0..{FOOT_WIDTH}"))),
        }
    }

    /// Column name used in the insole CSV schema.
    pub fn column_name(self) -> String {
        match self {
            Channel::Pressure(i) => format!("p{i:02}"),
            Channel::Gyro(i) => ["gx", "gy", "gz"][i].to_string(),
            Channel::Accel(i) => ["ax", "ay", "az"][i].to_string(),
        }
    }
}

/// Flat index of `(side, channel)` in an 82-wide sensor frame.
pub fn frame_layout_index(side: FootSide, channel: Channel) -> Result<usize> {
    Ok(side.offset() + channel.foot_offset()?)
}

/// Inverse of [`frame_layout_index`].
pub fn channel_at(index: usize) -> Result<(FootSide, Channel)> {
    if index >= FRAME_WIDTH {
        return Err(Error::Layout(format!("index {index} out of range 0..{FRAME_WIDTH}")));
    }
    let side = if index < FOOT_WIDTH { FootSide::Left } else { FootSide::Right };
    Ok((side, Channel::from_foot_offset(index - side.offset())?))
}

/// Names of the 82 merged channels, e.g. `L.p00`, `R.az`.
pub fn frame_channel_names() -> Vec<String> {
    (0..FRAME_WIDTH)
        .map(|i| {
            let (side, ch) = channel_at(i).expect("index in range");
            let prefix = match side {
                FootSide::Left => "L",
                FootSide::Right => "R",
            };
            format!("{prefix}.{}", ch.column_name())
        })
        .collect()
}

/// The channels of one foot in structured form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootChannels {
    pub pressure: [f64; PRESSURE_CHANNELS],
    pub gyro: [f64; GYRO_CHANNELS],
    pub accel: [f64; ACCEL_CHANNELS],
}

impl FootChannels {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != FOOT_WIDTH {
            return Err(Error::Layout(format!(
                "foot record must have {FOOT_WIDTH} values, got {}",
                values.len()
            )));
        }
        let mut out = FootChannels {
            pressure: [0.0; PRESSURE_CHANNELS],
            gyro: [0.0; GYRO_CHANNELS],
            accel: [0.0; ACCEL_CHANNELS],
        };
        out.pressure.copy_from_slice(&values[..PRESSURE_CHANNELS]);
        out.gyro
            .copy_from_slice(&values[PRESSURE_CHANNELS..PRESSURE_CHANNELS + GYRO_CHANNELS]);
        out.accel
            .copy_from_slice(&values[PRESSURE_CHANNELS + GYRO_CHANNELS..]);
        Ok(out)
    }

    pub fn write_into(&self, out: &mut [f64]) {
        out[..PRESSURE_CHANNELS].copy_from_slice(&self.pressure);
        out[PRESSURE_CHANNELS..PRESSURE_CHANNELS + GYRO_CHANNELS].copy_from_slice(&self.gyro);
        out[PRESSURE_CHANNELS + GYRO_CHANNELS..FOOT_WIDTH].copy_from_slice(&self.accel);
    }
}

/// One timestamped 82-wide sample from both insoles.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub timestamp: Timestamp,
    pub values: [f64; FRAME_WIDTH],
}

impl SensorFrame {
    pub fn from_feet(timestamp: Timestamp, left: &FootChannels, right: &FootChannels) -> Self {
        let mut values = [0.0; FRAME_WIDTH];
        left.write_into(&mut values[..FOOT_WIDTH]);
        right.write_into(&mut values[FOOT_WIDTH..]);
        SensorFrame { timestamp, values }
    }

    pub fn foot(&self, side: FootSide) -> FootChannels {
        let o = side.offset();
        FootChannels::from_slice(&self.values[o..o + FOOT_WIDTH]).expect("fixed width")
    }

    pub fn get(&self, side: FootSide, channel: Channel) -> Result<f64> {
        Ok(self.values[frame_layout_index(side, channel)?])
    }
}

macro_rules! joints {
    ($($name:ident),* $(,)?) => {
        /// The 21 skeleton joints, in their fixed ordinal order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum JointId { $($name),* }

        impl JointId {
            pub const ALL: [JointId; JOINT_COUNT] = [$(JointId::$name),*];

            pub fn name(self) -> &'static str {
                match self { $(JointId::$name => stringify!($name)),* }
            }
        }
    };
}

joints!(
    Hips, Ab, Chest, Neck, Head, LShoulder, LUArm, LFArm, LHand, RShoulder, RUArm, RFArm, RHand,
    LThigh, LShin, LFoot, LToe, RThigh, RShin, RFoot, RToe,
);

impl JointId {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<JointId> {
        JointId::ALL.get(index).copied()
    }

    /// The joint on the other side of the body; midline joints map to themselves.
    pub fn mirrored(self) -> JointId {
        use JointId::*;
        match self {
            LShoulder => RShoulder,
            LUArm => RUArm,
            LFArm => RFArm,
            LHand => RHand,
            RShoulder => LShoulder,
            RUArm => LUArm,
            RFArm => LFArm,
            RHand => LHand,
            LThigh => RThigh,
            LShin => RShin,
            LFoot => RFoot,
            LToe => RToe,
            RThigh => LThigh,
            RShin => LShin,
            RFoot => LFoot,
            RToe => LToe,
            other => other,
        }
    }

    pub fn part(self) -> BodyPart {
        BodyPart::ALL
            .into_iter()
            .find(|p| p.joints().contains(&self))
            .expect("body parts partition the joints")
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JointId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        JointId::ALL
            .into_iter()
            .find(|j| j.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown joint {s:?}")))
    }
}

/// Mocap CSV column names for the 63 coordinates, `<Joint>.<axis>`.
pub fn skeleton_column_names() -> Vec<String> {
    JointId::ALL
        .iter()
        .flat_map(|j| ["x", "y", "z"].map(|a| format!("{}.{a}", j.name())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodyPart {
    Head,
    Spine,
    Arms,
    Legs,
}

impl BodyPart {
    pub const ALL: [BodyPart; 4] = [BodyPart::Head, BodyPart::Spine, BodyPart::Arms, BodyPart::Legs];

    pub fn joints(self) -> &'static [JointId] {
        use JointId::*;
        match self {
            BodyPart::Head => &[Neck, Head],
            BodyPart::Spine => &[Hips, Ab, Chest],
            BodyPart::Arms => &[LShoulder, LUArm, LFArm, LHand, RShoulder, RUArm, RFArm, RHand],
            BodyPart::Legs => &[LThigh, LShin, LFoot, LToe, RThigh, RShin, RFoot, RToe],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BodyPart::Head => "Head",
            BodyPart::Spine => "Spine",
            BodyPart::Arms => "Arms",
            BodyPart::Legs => "Legs",
        }
    }
}

pub fn joints_of(part: BodyPart) -> &'static [JointId] {
    part.joints()
}

/// One timestamped pose, millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub timestamp: Timestamp,
    pub joints: [[f64; 3]; JOINT_COUNT],
}

impl SkeletonFrame {
    pub fn from_slice(timestamp: Timestamp, values: &[f64]) -> Result<Self> {
        if values.len() != SKELETON_WIDTH {
            return Err(Error::Shape(format!(
                "skeleton frame needs {SKELETON_WIDTH} values, got {}",
                values.len()
            )));
        }
        let mut joints = [[0.0; 3]; JOINT_COUNT];
        for (j, chunk) in values.chunks_exact(3).enumerate() {
            joints[j].copy_from_slice(chunk);
        }
        Ok(SkeletonFrame { timestamp, joints })
    }

    pub fn joint(&self, id: JointId) -> [f64; 3] {
        self.joints[id.index()]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.joints.iter().flatten().copied().collect()
    }
}

/// The recorded movements plus free movement and an unknown fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskLabel {
    TiltLeftRight,
    Bow,
    Squat,
    StandAndSit,
    OneLegStand,
    Walk,
    Jump,
    OneLegHop,
    Free,
    Unknown,
}

impl TaskLabel {
    pub const ALL: [TaskLabel; 10] = [
        TaskLabel::TiltLeftRight,
        TaskLabel::Bow,
        TaskLabel::Squat,
        TaskLabel::StandAndSit,
        TaskLabel::OneLegStand,
        TaskLabel::Walk,
        TaskLabel::Jump,
        TaskLabel::OneLegHop,
        TaskLabel::Free,
        TaskLabel::Unknown,
    ];

    /// The eight recorded movements.
    pub const RECORDED: [TaskLabel; 8] = [
        TaskLabel::TiltLeftRight,
        TaskLabel::Bow,
        TaskLabel::Squat,
        TaskLabel::StandAndSit,
        TaskLabel::OneLegStand,
        TaskLabel::Walk,
        TaskLabel::Jump,
        TaskLabel::OneLegHop,
    ];

    /// Column order used by error reports: the five evaluated tasks in their
    /// customary order, then the rest.
    pub const REPORT_ORDER: [TaskLabel; 10] = [
        TaskLabel::OneLegStand,
        TaskLabel::TiltLeftRight,
        TaskLabel::Bow,
        TaskLabel::StandAndSit,
        TaskLabel::Squat,
        TaskLabel::Walk,
        TaskLabel::Jump,
        TaskLabel::OneLegHop,
        TaskLabel::Free,
        TaskLabel::Unknown,
    ];

    pub fn report_rank(self) -> usize {
        TaskLabel::REPORT_ORDER
            .iter()
            .position(|t| *t == self)
            .expect("closed set")
    }

    /// Short name used as a report column header.
    pub fn display_name(self) -> &'static str {
        match self {
            TaskLabel::TiltLeftRight => "Tilt",
            TaskLabel::Bow => "Bow",
            TaskLabel::Squat => "Squat",
            TaskLabel::StandAndSit => "Stand and Sit",
            TaskLabel::OneLegStand => "Stand",
            TaskLabel::Walk => "Walk",
            TaskLabel::Jump => "Jump",
            TaskLabel::OneLegHop => "Hop",
            TaskLabel::Free => "Free",
            TaskLabel::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// A labeled time interval `[start, end)` in seconds on the common clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpan {
    pub task: TaskLabel,
    pub start: f64,
    pub end: f64,
}

/// Label of the span containing `t`, or `Unknown`.
pub fn label_at(spans: &[TaskSpan], t: f64) -> TaskLabel {
    spans
        .iter()
        .find(|s| s.start <= t && t < s.end)
        .map_or(TaskLabel::Unknown, |s| s.task)
}

/// Series metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub subject: Option<String>,
    pub task: Option<TaskLabel>,
    /// Nominal (or detected) source sample rate in Hz.
    pub sample_rate: Option<f64>,
}

/// Ordered, fixed-width frames with strictly increasing timestamps.
///
/// Values are stored row-major: frame `i` occupies
/// `values[i * width..(i + 1) * width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<f64>,
    width: usize,
    values: Vec<f64>,
    pub meta: SeriesMeta,
}

/// One-foot (41) or merged (82) sensor series.
pub type SensorSeries = TimeSeries;
/// 63-wide skeleton series.
pub type SkeletonSeries = TimeSeries;

impl TimeSeries {
    pub fn new(timestamps: Vec<f64>, width: usize, values: Vec<f64>, meta: SeriesMeta) -> Result<Self> {
        if width == 0 {
            return Err(Error::Shape("series width must be positive".into()));
        }
        if values.len() != timestamps.len() * width {
            return Err(Error::Shape(format!(
                "{} values do not fill {} frames of width {width}",
                values.len(),
                timestamps.len()
            )));
        }
        if let Some(bad) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!(
                "timestamps not strictly increasing at frame {}",
                bad + 1
            )));
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Data("non-finite timestamp".into()));
        }
        Ok(TimeSeries {
            timestamps,
            width,
            values,
            meta,
        })
    }

    pub fn empty(width: usize, meta: SeriesMeta) -> Self {
        TimeSeries {
            timestamps: Vec::new(),
            width,
            values: Vec::new(),
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn frame_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.width;
        &mut self.values[i * w..(i + 1) * w]
    }

    pub fn frames(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.timestamps
            .iter()
            .copied()
            .zip(self.values.chunks_exact(self.width))
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.width).copied().collect()
    }

    pub fn set_column(&mut self, c: usize, data: &[f64]) {
        for (i, v) in data.iter().enumerate() {
            self.values[i * self.width + c] = *v;
        }
    }

    pub fn first_time(&self) -> Option<f64> {
        self.timestamps.first().copied()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.timestamps.last().copied()
    }

    /// Appends a frame; the timestamp must exceed the current last one.
    pub fn push(&mut self, t: f64, frame: &[f64]) -> Result<()> {
        if frame.len() != self.width {
            return Err(Error::Shape(format!(
                "frame width {} != series width {}",
                frame.len(),
                self.width
            )));
        }
        if let Some(last) = self.last_time() {
            if !(t > last) {
                return Err(Error::Data(format!("timestamp {t} does not follow {last}")));
            }
        }
        self.timestamps.push(t);
        self.values.extend_from_slice(frame);
        Ok(())
    }

    /// Frames `range` as a new series with the same metadata.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeSeries {
        TimeSeries {
            timestamps: self.timestamps[range.clone()].to_vec(),
            width: self.width,
            values: self.values[range.start * self.width..range.end * self.width].to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// Same timestamps and metadata, new values of possibly different width.
    pub fn with_values(&self, width: usize, values: Vec<f64>) -> Result<TimeSeries> {
        TimeSeries::new(self.timestamps.clone(), width, values, self.meta.clone())
    }

    pub fn sensor_frame(&self, i: usize) -> Result<SensorFrame> {
        if self.width != FRAME_WIDTH {
            return Err(Error::Shape(format!("series width {} is not {FRAME_WIDTH}", self.width)));
        }
        let mut values = [0.0; FRAME_WIDTH];
        values.copy_from_slice(self.frame(i));
        Ok(SensorFrame {
            timestamp: Timestamp::new(self.timestamps[i])?,
            values,
        })
    }

    pub fn skeleton_frame(&self, i: usize) -> Result<SkeletonFrame> {
        SkeletonFrame::from_slice(Timestamp::new(self.timestamps[i])?, self.frame(i))
    }
}
