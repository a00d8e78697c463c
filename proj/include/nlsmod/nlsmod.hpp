#pragma once

#include "nlsmod/grid.hpp"
#include "nlsmod/fft.hpp"
#include "nlsmod/spectral.hpp"
#include "nlsmod/params.hpp"
#include "nlsmod/trajectory.hpp"
#include "nlsmod/norms.hpp"
#include "nlsmod/dynamics.hpp"
#include "nlsmod/pseudoconformal.hpp"
#include "nlsmod/fit.hpp"
#include "nlsmod/asymptotics.hpp"
#include "nlsmod/oracles.hpp"
#include "nlsmod/io.hpp"
#include "nlsmod/config.hpp"
#include "nlsmod/svg.hpp"
#include "nlsmod/harness.hpp"
