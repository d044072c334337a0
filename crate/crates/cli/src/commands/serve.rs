use std::net::{SocketAddr, ToSocketAddrs};

use leakcheck_review_service::{run, ServiceConfig};

use crate::args::ServeArgs;
use crate::config::{pick, FileConfig};
use crate::exit::{CliError, CliResult};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

pub fn cmd_serve(args: &ServeArgs, file: &FileConfig) -> CliResult<()> {
    let listen = pick(args.listen.clone(), file.listen.clone(), DEFAULT_LISTEN.to_owned());
    let addr: SocketAddr = listen
        .to_socket_addrs()
        .ok()
        .and_then(|mut a| a.next())
        .ok_or_else(|| CliError::Argument(format!("--listen {listen:?} is not host:port")))?;
    let threads = pick(
        args.threads,
        file.threads,
        std::thread::available_parallelism().map_or(1, |n| n.get()),
    );
    if threads == 0 {
        return Err(CliError::Argument("--threads must be positive".into()));
    }
    let config = ServiceConfig {
        report: args.report.clone(),
        queue: args.queue.clone(),
        labels: args.labels.clone(),
        registry: args.registry.clone(),
        data_root: args.data_root.clone().or_else(|| file.data_root.clone()),
        ui_dir: args.ui_dir.clone().or_else(|| file.ui_dir.clone()),
    };
    Ok(run(&config, addr, threads)?)
}
