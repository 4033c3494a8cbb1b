// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(glyphforge::cli::run(std::env::args_os()));
}
