#pragma once

#include "exceed/error.hpp"
#include "exceed/data_model.hpp"
#include "exceed/special_functions.hpp"
#include "exceed/covariance.hpp"
#include "exceed/optimize.hpp"
#include "exceed/smoothers.hpp"
#include "exceed/kriging.hpp"
#include "exceed/rng.hpp"
#include "exceed/parallel.hpp"
#include "exceed/simulator.hpp"
#include "exceed/csv_io.hpp"
#include "exceed/evaluation.hpp"
