import numpy as np
import pandas as pd

#### ---- ####


def describe_column(df, column):
    values = df[column].to_numpy()
    return {
        "mean": float(np.mean(values)),
        "std": float(np.std(values)),
        "p90": float(np.percentile(values, 90)),
    }


def rolling_mean(series, window=7):
    if window < 1:
        raise ValueError("window must be positive")
    return series.rolling(window).mean()


def describe_all(df):
    return {column: describe_column(df, column) for column in df.columns}
