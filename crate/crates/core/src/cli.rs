//! Command-line front end.
//!
//! Exit status is 0 on success, 1 on a domain error (reported as a single
//! `error: <code>: <detail>` line) and 2 on a usage error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::rngs::OsRng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{frames_needed, Codec, RasterImage, DEFAULT_RGB_CHANNEL};
use crate::error::Error;
use crate::imageio::{self, Format, ImageError};
use crate::key::{generate_key, StegoKey};
use crate::metrics::{compare, frame_capacity};
use crate::transport::{self, Receiver, ReceiverConfig, SendOptions, TransportError};

#[derive(Debug, Parser)]
#[command(
    name = "blockstego",
    version,
    about = "Keyed block-LSB steganography for display images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a key for an R x C block grid
    Keygen {
        #[arg(long)]
        rows: u32,
        #[arg(long)]
        cols: u32,
        /// Seed for a reproducible pattern; system entropy when omitted
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the payload bytes one image can carry under a key
    Capacity {
        #[arg(long)]
        key: String,
    },
    /// Hide a message in one or more cover images
    Embed {
        #[arg(long)]
        key: String,
        #[arg(long = "in", required = true, num_args = 1..)]
        covers: Vec<PathBuf>,
        #[arg(long)]
        msg: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        channel: ChannelArg,
    },
    /// Recover a message from stego images
    Extract {
        #[arg(long)]
        key: String,
        #[arg(long = "in", required = true, num_args = 1..)]
        stegos: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        channel: ChannelArg,
    },
    /// Compare two images
    Psnr {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Send image files to a display endpoint
    Send {
        #[arg(long)]
        to: String,
        #[arg(long = "in", required = true, num_args = 1..)]
        files: Vec<PathBuf>,
        /// Seconds to wait for each acknowledgment
        #[arg(long, default_value_t = 5.0)]
        timeout: f64,
    },
    /// Receive frames, store them, and decode when a key is given
    Display {
        #[arg(long)]
        listen: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        key: Option<String>,
        #[command(flatten)]
        channel: ChannelArg,
    },
}

#[derive(Debug, Args)]
struct ChannelArg {
    /// RGB channel carrying the data (0=red, 1=green, 2=blue)
    #[arg(long = "channel", default_value_t = DEFAULT_RGB_CHANNEL)]
    index: usize,
}

#[derive(Debug)]
enum CliError {
    Stego(Error),
    Image(PathBuf, ImageError),
    Transport(TransportError),
    Io(PathBuf, io::Error),
    OutputCollision(PathBuf),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Stego(e) => e.code(),
            CliError::Image(_, e) => e.code(),
            CliError::Transport(e) => e.code(),
            CliError::Io(..) => "io",
            CliError::OutputCollision(_) => "output-collision",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Stego(e) => write!(f, "{e}"),
            CliError::Image(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Transport(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::OutputCollision(p) => {
                write!(f, "two inputs would be written to {}", p.display())
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Stego(e)
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        CliError::Transport(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (including the program name) and runs one subcommand.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                2
            } else {
                let _ = write!(out, "{rendered}");
                0
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error: {}: {}", e.code(), detail);
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Keygen { rows, cols, seed } => {
            let key = match seed {
                Some(s) => generate_key(rows, cols, &mut ChaCha8Rng::seed_from_u64(s))?,
                None => generate_key(rows, cols, &mut OsRng)?,
            };
            print_line(out, &key.to_string())
        }
        Command::Capacity { key } => {
            let key = parse_key(&key)?;
            print_line(out, &frame_capacity(&key).to_string())
        }
        Command::Embed {
            key,
            covers,
            msg,
            out_dir,
            channel,
        } => embed(
            &parse_key(&key)?,
            &covers,
            &msg,
            &out_dir,
            channel.index,
            out,
        ),
        Command::Extract {
            key,
            stegos,
            out: path,
            channel,
        } => {
            let codec = Codec::new(parse_key(&key)?).with_rgb_channel(channel.index);
            let images = stegos
                .iter()
                .map(|p| load(p))
                .collect::<CliResult<Vec<_>>>()?;
            let message = codec.extract_message(&images)?;
            fs::write(&path, &message).map_err(|e| CliError::Io(path.clone(), e))?;
            print_line(
                out,
                &format!("{} bytes -> {}", message.len(), path.display()),
            )
        }
        Command::Psnr { a, b } => {
            let report = compare(&load(&a)?, &load(&b)?)?;
            print_line(out, &report.to_string())
        }
        Command::Send { to, files, timeout } => {
            let payloads = files
                .iter()
                .map(|p| fs::read(p).map_err(|e| CliError::Io(p.clone(), e)))
                .collect::<CliResult<Vec<_>>>()?;
            let options = SendOptions {
                ack_timeout: Duration::from_secs_f64(timeout.max(0.001)),
                ..SendOptions::default()
            };
            let report = transport::send_with(&to, &payloads, &options)?;
            for f in &report.frames {
                print_line(
                    out,
                    &format!(
                        "frame {}/{}: {} ({} bytes)",
                        f.frame_index,
                        report.frames.len(),
                        if f.accepted { "ack" } else { "nak" },
                        f.bytes
                    ),
                )?;
            }
            Ok(())
        }
        Command::Display {
            listen,
            out_dir,
            key,
            channel,
        } => {
            let key = key.as_deref().map(parse_key).transpose()?;
            let mut config = ReceiverConfig::new(out_dir, key);
            config.rgb_channel = channel.index;
            let receiver = Receiver::bind(&listen, config)?;
            let addr = receiver
                .local_addr()
                .map_err(|e| CliError::Transport(e.into()))?;
            print_line(out, &format!("listening on {addr}"))?;
            receiver.run()?;
            Ok(())
        }
    }
}

fn parse_key(text: &str) -> CliResult<StegoKey> {
    Ok(text.parse::<StegoKey>()?)
}

fn load(path: &Path) -> CliResult<RasterImage> {
    imageio::load(path).map_err(|e| CliError::Image(path.to_path_buf(), e))
}

fn print_line(out: &mut dyn Write, line: &str) -> CliResult<()> {
    writeln!(out, "{line}")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e))
}

/// `<stem>.stego.<ext>` inside `dir`; the extension follows the input file,
/// or the image format when the input has none.
fn stego_path(dir: &Path, input: &Path, image: &RasterImage) -> PathBuf {
    let stem = input
        .file_stem()
        .map_or_else(|| "cover".into(), |s| s.to_string_lossy().into_owned());
    let ext = input.extension().map_or_else(
        || Format::of(image).extension().into(),
        |e| e.to_string_lossy().into_owned(),
    );
    dir.join(format!("{stem}.stego.{ext}"))
}

fn embed(
    key: &StegoKey,
    cover_paths: &[PathBuf],
    msg: &Path,
    out_dir: &Path,
    channel: usize,
    out: &mut dyn Write,
) -> CliResult<()> {
    let message = fs::read(msg).map_err(|e| CliError::Io(msg.to_path_buf(), e))?;
    let needed = frames_needed(key, message.len())?;
    if needed > cover_paths.len() {
        return Err(Error::NotEnoughCovers {
            needed,
            available: cover_paths.len(),
        }
        .into());
    }
    // Only covers that receive a frame are read and written.
    let used = &cover_paths[..needed];
    let covers = used
        .iter()
        .map(|p| load(p))
        .collect::<CliResult<Vec<_>>>()?;
    let codec = Codec::new(*key).with_rgb_channel(channel);
    let stegos = codec.embed_message(&covers, &message)?;

    let targets: Vec<PathBuf> = used
        .iter()
        .zip(&stegos)
        .map(|(p, img)| stego_path(out_dir, p, img))
        .collect();
    for (i, t) in targets.iter().enumerate() {
        if targets[..i].contains(t) {
            return Err(CliError::OutputCollision(t.clone()));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(out_dir.to_path_buf(), e))?;
    for (target, stego) in targets.iter().zip(&stegos) {
        imageio::save(target, stego).map_err(|e| CliError::Image(target.clone(), e))?;
    }
    for target in &targets {
        print_line(out, &target.display().to_string())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("blockstego").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn keygen_is_seeded() {
        let (code, out, err) =
            run_capture(&["keygen", "--rows", "16", "--cols", "16", "--seed", "7"]);
        assert_eq!(code, 0, "{err}");
        assert!(err.is_empty());
        let line = out.trim_end();
        assert_eq!(line.len(), 8);
        assert!(line.starts_with("1010"));
        assert_eq!(
            run_capture(&["keygen", "--rows", "16", "--cols", "16", "--seed", "7"]).1,
            out
        );
    }

    #[test]
    fn keygen_bad_geometry_is_domain_error() {
        let (code, out, err) = run_capture(&["keygen", "--rows", "0", "--cols", "16"]);
        assert_eq!(code, 1);
        assert!(out.is_empty());
        assert_eq!(err.lines().count(), 1);
        assert!(err.starts_with("error: key-invalid: "));
    }

    #[test]
    fn capacity() {
        let (code, out, _) = run_capture(&["capacity", "--key", "10100000"]);
        assert_eq!((code, out.as_str()), (0, "27\n"));
        let (code, out, err) = run_capture(&["capacity", "--key", "zz"]);
        assert_eq!(code, 1);
        assert!(out.is_empty());
        assert!(err.starts_with("error: key-invalid:"));
    }

    #[test]
    fn usage_errors_exit_2() {
        for args in [
            &[][..],
            &["bogus"],
            &["keygen", "--rows", "x", "--cols", "1"],
            &["capacity"],
        ] {
            let (code, out, err) = run_capture(args);
            assert_eq!(code, 2, "{args:?}");
            assert!(out.is_empty());
            assert!(!err.is_empty());
        }
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("keygen"));
    }
}
