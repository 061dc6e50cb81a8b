//! Destinations for tertiary-channel lines.

use std::io::{self, BufWriter, Write};
use std::net::TcpStream;
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;

/// Receives complete, newline-terminated protocol lines in order.
pub trait AmmSink {
    fn deliver(&mut self, line: &[u8]) -> io::Result<()>;
}

/// In-process AMM: keeps every line it is given.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemorySink {
    bytes: Vec<u8>,
    messages: usize,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.messages
    }

    pub fn is_empty(&self) -> bool {
        self.messages == 0
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> {
        std::str::from_utf8(&self.bytes)
            .expect("protocol lines are UTF-8")
            .lines()
    }
}

impl AmmSink for MemorySink {
    fn deliver(&mut self, line: &[u8]) -> io::Result<()> {
        self.bytes.extend_from_slice(line);
        self.messages += 1;
        Ok(())
    }
}

const QUEUE_DEPTH: usize = 1024;

/// Pushes lines to a TCP listener from a writer thread fed by a bounded,
/// ordered queue; lines arrive in the order they were delivered.
#[derive(Debug)]
pub struct TcpSink {
    queue: Option<SyncSender<Vec<u8>>>,
    writer: Option<JoinHandle<io::Result<u64>>>,
}

impl TcpSink {
    pub fn connect(addr: &str) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let (queue, lines) = sync_channel::<Vec<u8>>(QUEUE_DEPTH);
        let writer = std::thread::Builder::new()
            .name("amm-tcp-writer".into())
            .spawn(move || {
                let mut out = BufWriter::new(stream);
                let mut sent = 0u64;
                for line in lines {
                    out.write_all(&line)?;
                    sent += 1;
                }
                out.flush()?;
                Ok(sent)
            })?;
        Ok(Self {
            queue: Some(queue),
            writer: Some(writer),
        })
    }

    fn join(&mut self) -> io::Result<u64> {
        self.queue.take();
        match self.writer.take() {
            Some(handle) => handle
                .join()
                .map_err(|_| io::Error::other("TCP writer thread panicked"))?,
            None => Ok(0),
        }
    }

    /// Flush everything queued, close the connection and return the number
    /// of lines written.
    pub fn finish(mut self) -> io::Result<u64> {
        self.join()
    }
}

impl AmmSink for TcpSink {
    fn deliver(&mut self, line: &[u8]) -> io::Result<()> {
        let queue = self
            .queue
            .as_ref()
            .ok_or_else(|| io::Error::new(io::ErrorKind::BrokenPipe, "sink already closed"))?;
        if queue.send(line.to_vec()).is_err() {
            // The writer quit early; surface its error.
            self.join()?;
            return Err(io::Error::new(
                io::ErrorKind::BrokenPipe,
                "AMM connection closed",
            ));
        }
        Ok(())
    }
}

impl Drop for TcpSink {
    fn drop(&mut self) {
        let _ = self.join();
    }
}
