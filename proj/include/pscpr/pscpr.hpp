// Umbrella header.
#pragma once

#include "pscpr/channel.hpp"
#include "pscpr/constellation.hpp"
#include "pscpr/cpr.hpp"
#include "pscpr/decision.hpp"
#include "pscpr/harness.hpp"
#include "pscpr/metrics.hpp"
#include "pscpr/rng.hpp"
#include "pscpr/special.hpp"
