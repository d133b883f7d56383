#pragma once

#include "error.hpp"
#include "rng.hpp"
#include "csv.hpp"
#include "fbm.hpp"
#include "wavelet.hpp"
#include "noise.hpp"
#include "estimator.hpp"
#include "report.hpp"
#include "harness.hpp"
