// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace geomtext {

/// Entry point behind the geomtext binary. Exit codes: 0 success, 1 config
/// or contract error, 2 internal numeric failure.
int cli_run(int argc, const char* const* argv);

}  // namespace geomtext
