// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include "effcap/capacity.hpp"
#include "effcap/constellation.hpp"
#include "effcap/error.hpp"
#include "effcap/fading.hpp"
#include "effcap/lowpower.hpp"
#include "effcap/policy_io.hpp"
#include "effcap/solver.hpp"
