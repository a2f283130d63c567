#pragma once

#include "iac/baselines.hpp"
#include "iac/basis.hpp"
#include "iac/curve.hpp"
#include "iac/fit.hpp"
#include "iac/gradcheck.hpp"
#include "iac/image.hpp"
#include "iac/metrics.hpp"
#include "iac/synth.hpp"
#include "iac/transform.hpp"
