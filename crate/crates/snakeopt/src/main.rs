use snakeopt::cli;

fn main() {
    std::process::exit(cli::run());
}
