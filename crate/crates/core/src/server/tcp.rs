use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde::Serialize;

use super::protocol::{CommandPayload, Done, Envelope, Kind, SdcResult, SelectPayload, Stage, StageError};
use super::session::{Hub, Outbox, SessionError};
use crate::sdc::ExtractedWire;

/// A running server; dropping it does not stop it, `shutdown` does.
pub struct Listening {
    addr: SocketAddr,
    closing: Arc<AtomicBool>,
    accept: JoinHandle<()>,
}

impl Listening {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections. Open connections run until their
    /// clients hang up.
    pub fn shutdown(self) {
        self.closing.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        let _ = self.accept.join();
    }

    /// Blocks for as long as the server accepts connections.
    pub fn wait(self) {
        let _ = self.accept.join();
    }
}

/// Binds `addr` and serves each connection on its own threads.
pub fn serve(hub: Arc<Hub>, addr: impl ToSocketAddrs) -> io::Result<Listening> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let closing = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&closing);
    let accept = thread::spawn(move || {
        for stream in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let hub = Arc::clone(&hub);
            thread::spawn(move || {
                let _ = connection(hub, stream);
            });
        }
    });
    Ok(Listening { addr, closing, accept })
}

fn line_sink(stream: TcpStream) -> impl FnMut(&Envelope) + Send + 'static {
    let mut w = io::BufWriter::new(stream);
    move |env| {
        let _ = writeln!(w, "{}", env.to_line()).and_then(|_| w.flush());
    }
}

fn connection(hub: Arc<Hub>, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let outbox = Outbox::new(line_sink(stream.try_clone()?));
    let mut lines = BufReader::new(stream).lines();

    let first = loop {
        match lines.next() {
            None => return Ok(()),
            Some(line) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match Envelope::from_line(&line) {
                    Ok(env) => break env,
                    Err(e) => outbox.error(&e),
                }
            }
        }
    };
    if first.kind != Kind::Hello {
        // stateless fallback: each command is parsed and answered alone
        let mut env = Some(first);
        loop {
            if let Some(env) = env.take() {
                stateless(&hub, &outbox, &env);
            }
            match lines.next() {
                None => return Ok(()),
                Some(line) => match Envelope::from_line(&line?) {
                    Ok(e) => env = Some(e),
                    Err(e) => outbox.error(&e),
                },
            }
        }
    }

    let session = hub.open(Arc::clone(&outbox));
    session.welcome();
    let control = session.control();
    let (tx, rx) = mpsc::channel::<Envelope>();
    let worker = thread::spawn(move || {
        let mut session = session;
        for env in rx {
            session.handle(&env);
        }
    });
    for line in lines {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let env = match Envelope::from_line(&line).and_then(|env| control.admit(&env).map(|_| env)) {
            Ok(env) => env,
            Err(e) => {
                outbox.error(&e);
                continue;
            }
        };
        if !control.intercept(&env) && tx.send(env).is_err() {
            break;
        }
    }
    control.stop_handle().stop();
    drop(tx);
    let _ = worker.join();
    Ok(())
}

fn stateless(hub: &Hub, outbox: &Outbox, env: &Envelope) {
    let reply = |ok: bool| {
        outbox.send(
            Kind::Done,
            Done {
                reply_to: env.seq,
                outcome: if ok {
                    super::Outcome::Completed
                } else {
                    super::Outcome::Failed
                },
            },
        )
    };
    if env.kind != Kind::Command {
        outbox.error(&StageError::new(
            Stage::Session,
            &SessionError::UnknownSession("none; send hello first".into()),
        ));
        return reply(false);
    }
    let result = env.payload_as::<CommandPayload>().and_then(|c| {
        let (tree, extracted) = hub.analyze(&c.text)?;
        let defaults = hub.chain().defaults;
        Ok(SdcResult {
            text: c.text,
            tree,
            levels: extracted
                .iter()
                .map(|e| {
                    e.as_sdc()
                        .and_then(|s| crate::controller::classify(s, &defaults).ok())
                        .map(|l| l.kind())
                })
                .collect(),
            extracted: extracted.iter().map(ExtractedWire::from).collect(),
        })
    });
    match result {
        Ok(r) => {
            outbox.send(Kind::SdcResult, r);
            reply(true)
        }
        Err(e) => {
            outbox.error(&e);
            reply(false)
        }
    }
}

/// Blocking protocol client, used by tests, examples and tooling.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: Arc<Mutex<(u64, TcpStream)>>,
    session: String,
}

/// Sends on a client's connection from another thread.
#[derive(Clone)]
pub struct ClientSender {
    writer: Arc<Mutex<(u64, TcpStream)>>,
    session: String,
}

impl ClientSender {
    /// Returns the seq assigned to the message.
    pub fn send(&self, kind: Kind, payload: impl Serialize) -> io::Result<u64> {
        let mut g = self.writer.lock().map_err(|_| io::Error::other("poisoned"))?;
        g.0 += 1;
        let env = Envelope::new(kind, payload).with_session(&self.session, g.0);
        writeln!(g.1, "{}", env.to_line())?;
        g.1.flush()?;
        Ok(g.0)
    }

    pub fn stop(&self) -> io::Result<u64> {
        self.send(Kind::Stop, serde_json::Value::Null)
    }
}

impl Client {
    /// Connects and completes the hello/welcome handshake.
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut writer = stream.try_clone()?;
        writeln!(
            writer,
            "{}",
            Envelope::new(Kind::Hello, serde_json::Value::Null).to_line()
        )?;
        let mut reader = BufReader::new(stream);
        let welcome = read_envelope(&mut reader)?;
        let session = match (welcome.kind, welcome.session) {
            (Kind::Welcome, Some(s)) => s,
            _ => return Err(io::Error::new(io::ErrorKind::InvalidData, "expected welcome")),
        };
        Ok(Self {
            reader,
            writer: Arc::new(Mutex::new((0, writer))),
            session,
        })
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn sender(&self) -> ClientSender {
        ClientSender {
            writer: Arc::clone(&self.writer),
            session: self.session.clone(),
        }
    }

    pub fn send(&self, kind: Kind, payload: impl Serialize) -> io::Result<u64> {
        self.sender().send(kind, payload)
    }

    pub fn command(&self, text: &str) -> io::Result<u64> {
        self.send(
            Kind::Command,
            CommandPayload {
                text: text.to_string(),
                source: Default::default(),
            },
        )
    }

    pub fn select(&self, index: usize) -> io::Result<u64> {
        self.send(Kind::SelectGrasp, SelectPayload { index })
    }

    pub fn recv(&mut self) -> io::Result<Envelope> {
        read_envelope(&mut self.reader)
    }

    /// Reads until the `done` answering `seq`, returning everything seen
    /// including it.
    pub fn until_done(&mut self, seq: u64) -> io::Result<Vec<Envelope>> {
        self.until_done_with(seq, |_| {})
    }

    /// As `until_done`, calling `each` on every message as it arrives.
    pub fn until_done_with(&mut self, seq: u64, mut each: impl FnMut(&Envelope)) -> io::Result<Vec<Envelope>> {
        let mut out = Vec::new();
        loop {
            let env = self.recv()?;
            each(&env);
            let finished = env.kind == Kind::Done && env.payload_as::<Done>().is_ok_and(|d| d.reply_to == seq);
            out.push(env);
            if finished {
                return Ok(out);
            }
        }
    }
}

fn read_envelope(reader: &mut BufReader<TcpStream>) -> io::Result<Envelope> {
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "server closed the connection",
            ));
        }
        if !line.trim().is_empty() {
            return Envelope::from_line(line.trim()).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e));
        }
    }
}
