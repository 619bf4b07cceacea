#pragma once

#include "scatinv/baselines.hpp"
#include "scatinv/config.hpp"
#include "scatinv/error.hpp"
#include "scatinv/estimator.hpp"
#include "scatinv/fft.hpp"
#include "scatinv/filterbank.hpp"
#include "scatinv/image.hpp"
#include "scatinv/io.hpp"
#include "scatinv/metrics.hpp"
#include "scatinv/operators.hpp"
#include "scatinv/parallel.hpp"
#include "scatinv/pipeline.hpp"
#include "scatinv/processes.hpp"
#include "scatinv/scattering.hpp"
#include "scatinv/solver.hpp"
