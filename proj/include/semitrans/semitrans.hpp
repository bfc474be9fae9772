#pragma once

#include "semitrans/bandwidth.hpp"
#include "semitrans/bootstrap.hpp"
#include "semitrans/dataset.hpp"
#include "semitrans/estimator.hpp"
#include "semitrans/independence_test.hpp"
#include "semitrans/io.hpp"
#include "semitrans/kde.hpp"
#include "semitrans/kernels.hpp"
#include "semitrans/local_polynomial.hpp"
#include "semitrans/parallel.hpp"
#include "semitrans/rng.hpp"
#include "semitrans/simulation.hpp"
#include "semitrans/version.hpp"
#include "semitrans/yeo_johnson.hpp"
