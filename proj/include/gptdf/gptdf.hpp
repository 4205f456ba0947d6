#pragma once

#include "gptdf/config.hpp"
#include "gptdf/data_io.hpp"
#include "gptdf/edge_sim.hpp"
#include "gptdf/error.hpp"
#include "gptdf/evaluation.hpp"
#include "gptdf/fit.hpp"
#include "gptdf/fusion.hpp"
#include "gptdf/gp.hpp"
#include "gptdf/kernel.hpp"
#include "gptdf/protocol.hpp"
#include "gptdf/time_series.hpp"
