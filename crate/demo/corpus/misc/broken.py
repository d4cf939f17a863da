import pandas as pd


def report(df):
    if df.empty:
        return None
    return df.describe(
