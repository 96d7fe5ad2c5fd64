fn main() -> anyhow::Result<()> {
    diarkit::cli::run()
}
