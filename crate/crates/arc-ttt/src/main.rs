fn main() {
    match arc_ttt::cli::run_from(std::env::args_os()) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            // Clap errors carry their own formatting (help/usage output).
            if let Some(clap_err) = e.downcast_ref::<clap::Error>() {
                clap_err.exit();
            }
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
