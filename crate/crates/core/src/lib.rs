pub mod channel;
pub mod exec;
pub mod mbus;
pub mod muc;
pub mod obis;
pub mod report;
pub mod scenario;
pub mod traffic;
