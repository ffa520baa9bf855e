//! Length-delimited JSON frames over any byte stream, plus an in-memory
//! loopback pair used by tests and the replay runner.

use std::marker::PhantomData;

use futures::stream::{SplitSink, SplitStream};
use bytes::Bytes;
use futures::{future, Sink, SinkExt, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::io::{AsyncRead, AsyncWrite, DuplexStream};
use tokio_util::codec::{Framed, LengthDelimitedCodec};

use super::protocol::{decode, encode, ClientMessage, ProtocolError, ServerMessage};

const MAX_FRAME: usize = 64 * 1024 * 1024;
const LOOPBACK_BUFFER: usize = 256 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

fn codec() -> LengthDelimitedCodec {
    LengthDelimitedCodec::builder()
        .max_frame_length(MAX_FRAME)
        .new_codec()
}

/// A typed connection: sends `Out`, receives `In`.
pub struct FramedConn<In, Out, T = DuplexStream> {
    framed: Framed<T, LengthDelimitedCodec>,
    _types: PhantomData<fn(Out) -> In>,
}

pub type ClientConn = FramedConn<ServerMessage, ClientMessage>;
pub type ServerConn = FramedConn<ClientMessage, ServerMessage>;

/// Two connected ends: what the client sends the server receives and
/// vice versa.
pub fn loopback() -> (ClientConn, ServerConn) {
    let (a, b) = tokio::io::duplex(LOOPBACK_BUFFER);
    (FramedConn::new(a), FramedConn::new(b))
}

impl<In, Out, T> FramedConn<In, Out, T>
where
    In: DeserializeOwned,
    Out: Serialize,
    T: AsyncRead + AsyncWrite + Unpin,
{
    pub fn new(io: T) -> Self {
        Self {
            framed: Framed::new(io, codec()),
            _types: PhantomData,
        }
    }

    pub async fn send(&mut self, msg: &Out) -> Result<(), TransportError> {
        self.framed.send(Bytes::from(encode(msg))).await?;
        Ok(())
    }

    /// `None` once the peer has closed the stream.
    pub async fn recv(&mut self) -> Option<Result<In, TransportError>> {
        let frame = self.framed.next().await?;
        Some(frame.map_err(TransportError::from).and_then(|bytes| parse(&bytes)))
    }

    /// Typed sink and stream halves. The stream ends at the first I/O
    /// error; undecodable frames are yielded as errors.
    pub fn into_parts(
        self,
    ) -> (
        impl Sink<Out, Error = TransportError> + Unpin,
        impl Stream<Item = Result<In, ProtocolError>> + Unpin,
    ) {
        let (sink, stream) = self.framed.split();
        let sink = sink
            .sink_map_err(TransportError::from)
            .with(|msg: Out| future::ready(Ok::<_, TransportError>(Bytes::from(encode(&msg)))));
        let stream = stream
            .take_while(|frame| future::ready(frame.is_ok()))
            .filter_map(|frame| {
                future::ready(frame.ok().map(|bytes| match std::str::from_utf8(&bytes) {
                    Ok(text) => decode(text),
                    Err(_) => Err(ProtocolError::NotText),
                }))
            });
        (Box::pin(sink), Box::pin(stream))
    }

    pub fn split(self) -> (FrameSender<Out, T>, FrameReceiver<In, T>) {
        let (sink, stream) = self.framed.split();
        (
            FrameSender { sink, _types: PhantomData },
            FrameReceiver { stream, _types: PhantomData },
        )
    }
}

fn parse<In: DeserializeOwned>(bytes: &[u8]) -> Result<In, TransportError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ProtocolError::NotText)?;
    Ok(decode(text)?)
}

pub struct FrameSender<Out, T = DuplexStream> {
    sink: SplitSink<Framed<T, LengthDelimitedCodec>, Bytes>,
    _types: PhantomData<fn(Out)>,
}

impl<Out: Serialize, T: AsyncRead + AsyncWrite + Unpin> FrameSender<Out, T> {
    pub async fn send(&mut self, msg: &Out) -> Result<(), TransportError> {
        self.sink.send(Bytes::from(encode(msg))).await?;
        Ok(())
    }

    pub async fn close(&mut self) -> Result<(), TransportError> {
        self.sink.close().await?;
        Ok(())
    }
}

pub struct FrameReceiver<In, T = DuplexStream> {
    stream: SplitStream<Framed<T, LengthDelimitedCodec>>,
    _types: PhantomData<fn() -> In>,
}

impl<In: DeserializeOwned, T: AsyncRead + AsyncWrite + Unpin> FrameReceiver<In, T> {
    pub async fn recv(&mut self) -> Option<Result<In, TransportError>> {
        let frame = self.stream.next().await?;
        Some(frame.map_err(TransportError::from).and_then(|bytes| parse(&bytes)))
    }
}
